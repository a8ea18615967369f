#include "cobra/serialize.hpp"

#include <zlib.h>

#include <bit>
#include <cstdio>
#include <cstring>

namespace cobra {

namespace {

struct ByteWriter {
    std::vector<uint8_t> buf;

    void u8(uint8_t v) { buf.push_back(v); }
    void u16(uint16_t v) {
        buf.push_back(static_cast<uint8_t>(v));
        buf.push_back(static_cast<uint8_t>(v >> 8));
    }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void i64(int64_t v) {
        const auto u = static_cast<uint64_t>(v);
        for (int i = 0; i < 8; ++i) buf.push_back(static_cast<uint8_t>(u >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<uint32_t>(v)); }
    void str(const std::string& s) {
        if (s.size() > UINT16_MAX) throw validation_error("serialize: string too long");
        u16(static_cast<uint16_t>(s.size()));
        buf.insert(buf.end(), s.begin(), s.end());
    }
};

struct ByteReader {
    const uint8_t* p;
    size_t len;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > len) throw validation_error("deserialize: truncated file");
    }
    uint8_t u8() {
        need(1);
        return p[pos++];
    }
    uint16_t u16() {
        need(2);
        uint16_t v = static_cast<uint16_t>(p[pos] | (p[pos + 1] << 8));
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    int64_t i64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[pos + i]) << (8 * i);
        pos += 8;
        return static_cast<int64_t>(v);
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string str() {
        const uint16_t n = u16();
        need(n);
        std::string s(reinterpret_cast<const char*>(p + pos), n);
        pos += n;
        return s;
    }
};

void write_dims(ByteWriter& w, const std::vector<int64_t>& dims) {
    if (dims.size() > 255) throw validation_error("serialize: tensor rank > 255");
    w.u8(static_cast<uint8_t>(dims.size()));
    for (int64_t d : dims) w.i64(d);
}

std::vector<int64_t> read_dims(ByteReader& r) {
    const uint8_t rank = r.u8();
    std::vector<int64_t> dims(rank);
    for (auto& d : dims) d = r.i64();
    return dims;
}

void write_weight_section(ByteWriter& w, const WeightStore& ws) {
    w.u32(static_cast<uint32_t>(ws.size()));
    for (const auto& [name, t] : ws.entries()) {
        w.str(name);
        write_dims(w, t.dims());
        for (float v : t.values()) w.f32(v);
    }
}

WeightStore read_weight_section(ByteReader& r) {
    WeightStore ws;
    const uint32_t n = r.u32();
    for (uint32_t i = 0; i < n; ++i) {
        const std::string name = r.str();
        auto dims = read_dims(r);
        Tensor t(dims);
        for (float& v : t.values()) v = r.f32();
        ws.add(name, std::move(t));
    }
    return ws;
}

void append_crc(std::vector<uint8_t>& buf) {
    const uint32_t crc =
        static_cast<uint32_t>(crc32(0L, buf.data(), static_cast<uInt>(buf.size())));
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<uint8_t>(crc >> (8 * i)));
}

// Splits off and checks the trailing CRC; returns the payload reader.
ByteReader open_checked(const std::vector<uint8_t>& bytes, const char* magic) {
    if (bytes.size() < 10) throw validation_error("deserialize: file too short");
    const size_t body = bytes.size() - 4;
    uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) stored |= static_cast<uint32_t>(bytes[body + i]) << (8 * i);
    const uint32_t actual =
        static_cast<uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(body)));
    if (stored != actual) throw validation_error("deserialize: checksum mismatch");

    ByteReader r{bytes.data(), body};
    char m[4];
    for (char& c : m) c = static_cast<char>(r.u8());
    if (std::memcmp(m, magic, 4) != 0)
        throw validation_error(std::string("deserialize: bad magic (expected ") + magic + ")");
    const uint16_t ver = r.u16();
    if (ver != kModelFormatVersion)
        throw validation_error("deserialize: unsupported format version " + std::to_string(ver));
    return r;
}

std::vector<uint8_t> load_bytes(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw io_error("cannot open " + path);
    std::fseek(f, 0, SEEK_END);
    const long n = std::ftell(f);
    std::fseek(f, 0, SEEK_SET);
    std::vector<uint8_t> bytes(n < 0 ? 0 : static_cast<size_t>(n));
    const bool ok = n >= 0 && std::fread(bytes.data(), 1, bytes.size(), f) == bytes.size();
    std::fclose(f);
    if (!ok) throw io_error("read failure on " + path);
    return bytes;
}

void store_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw io_error("cannot open " + path + " for writing");
    const bool ok = std::fwrite(bytes.data(), 1, bytes.size(), f) == bytes.size();
    if (std::fclose(f) != 0 || !ok) throw io_error("write failure on " + path);
}

}  // namespace

std::vector<uint8_t> serialize_bytes(const Graph& g, const WeightStore& ws) {
    g.validate(ws);
    ByteWriter w;
    w.buf.reserve(64 + ws.total_elements() * 4);
    for (char c : {'C', 'B', 'R', 'G'}) w.u8(static_cast<uint8_t>(c));
    w.u16(kModelFormatVersion);

    w.u32(static_cast<uint32_t>(g.inputs.size()));
    for (const auto& in : g.inputs) {
        w.str(in.name);
        write_dims(w, in.dims);
    }

    w.u32(static_cast<uint32_t>(g.nodes.size()));
    for (const auto& n : g.nodes) {
        ByteWriter rec;
        rec.i64(n.id);
        rec.u8(static_cast<uint8_t>(n.kind));
        rec.u8(n.fused_relu ? 1 : 0);
        rec.u16(static_cast<uint16_t>(n.inputs.size()));
        for (TensorRef r : n.inputs) rec.i64(r);
        const bool has_conv = n.kind == OpKind::conv || n.kind == OpKind::conv_transpose;
        rec.u8(has_conv ? 1 : 0);
        if (has_conv) {
            for (int64_t v : n.conv.kernel) rec.i64(v);
            for (int64_t v : n.conv.stride) rec.i64(v);
            for (int64_t v : n.conv.pad) rec.i64(v);
            rec.i64(n.conv.in_channels);
            rec.i64(n.conv.out_channels);
            rec.u8(n.conv.bias ? 1 : 0);
        }
        rec.str(n.weight);
        rec.str(n.bias);
        w.u32(static_cast<uint32_t>(rec.buf.size()));
        w.buf.insert(w.buf.end(), rec.buf.begin(), rec.buf.end());
    }

    w.u32(static_cast<uint32_t>(g.outputs.size()));
    for (const auto& out : g.outputs) {
        w.str(out.name);
        w.i64(out.ref);
    }

    write_weight_section(w, ws);
    append_crc(w.buf);
    return std::move(w.buf);
}

std::pair<Graph, WeightStore> deserialize_bytes(const std::vector<uint8_t>& bytes) {
    ByteReader r = open_checked(bytes, "CBRG");

    Graph g;
    const uint32_t n_in = r.u32();
    for (uint32_t i = 0; i < n_in; ++i) {
        GraphInput in;
        in.name = r.str();
        in.dims = read_dims(r);
        g.inputs.push_back(std::move(in));
    }

    const uint32_t n_nodes = r.u32();
    for (uint32_t i = 0; i < n_nodes; ++i) {
        const uint32_t rec_len = r.u32();
        const size_t rec_end = r.pos + rec_len;
        r.need(rec_len);
        Node n;
        n.id = r.i64();
        n.kind = static_cast<OpKind>(r.u8());
        if (static_cast<uint8_t>(n.kind) > static_cast<uint8_t>(OpKind::identity))
            throw validation_error("deserialize: unknown op kind");
        n.fused_relu = r.u8() != 0;
        const uint16_t n_refs = r.u16();
        n.inputs.resize(n_refs);
        for (auto& ref : n.inputs) ref = r.i64();
        if (r.u8()) {
            for (auto& v : n.conv.kernel) v = r.i64();
            for (auto& v : n.conv.stride) v = r.i64();
            for (auto& v : n.conv.pad) v = r.i64();
            n.conv.in_channels = r.i64();
            n.conv.out_channels = r.i64();
            n.conv.bias = r.u8() != 0;
        }
        n.weight = r.str();
        n.bias = r.str();
        if (r.pos != rec_end)
            throw validation_error("deserialize: node record length mismatch");
        g.nodes.push_back(std::move(n));
    }

    const uint32_t n_out = r.u32();
    for (uint32_t i = 0; i < n_out; ++i) {
        GraphOutput out;
        out.name = r.str();
        out.ref = r.i64();
        g.outputs.push_back(std::move(out));
    }

    WeightStore ws = read_weight_section(r);
    if (r.pos != r.len) throw validation_error("deserialize: trailing bytes");
    g.validate(ws);
    return {std::move(g), std::move(ws)};
}

void serialize(const Graph& g, const WeightStore& w, const std::string& path) {
    store_bytes(path, serialize_bytes(g, w));
}

std::pair<Graph, WeightStore> deserialize(const std::string& path) {
    return deserialize_bytes(load_bytes(path));
}

void write_weight_store(const WeightStore& ws, const std::string& path) {
    ByteWriter w;
    w.buf.reserve(16 + ws.total_elements() * 4);
    for (char c : {'C', 'B', 'R', 'W'}) w.u8(static_cast<uint8_t>(c));
    w.u16(kModelFormatVersion);
    write_weight_section(w, ws);
    append_crc(w.buf);
    store_bytes(path, w.buf);
}

WeightStore read_weight_store(const std::string& path) {
    const auto bytes = load_bytes(path);
    ByteReader r = open_checked(bytes, "CBRW");
    WeightStore ws = read_weight_section(r);
    if (r.pos != r.len) throw validation_error("deserialize: trailing bytes");
    return ws;
}

}  // namespace cobra
