#include "cobra/nifti_io.hpp"

#include <zlib.h>

#include <cstring>
#include <vector>

namespace cobra {

namespace {

// The classic nifti1 header, 348 bytes. Only the fields this module touches
// are named; the rest ride along as padding so offsets stay exact.
#pragma pack(push, 1)
struct Nifti1Header {
    int32_t sizeof_hdr;       // 0: must be 348
    char data_type[10];       // 4
    char db_name[18];         // 14
    int32_t extents;          // 32
    int16_t session_error;    // 36
    char regular;             // 38
    char dim_info;            // 39
    int16_t dim[8];           // 40: dim[0]=rank, dim[1..3]=(nx,ny,nz)
    float intent_p1;          // 56
    float intent_p2;          // 60
    float intent_p3;          // 64
    int16_t intent_code;      // 68
    int16_t datatype;         // 70
    int16_t bitpix;           // 72
    int16_t slice_start;      // 74
    float pixdim[8];          // 76: pixdim[1..3]=(dx,dy,dz) mm
    float vox_offset;         // 108
    float scl_slope;          // 112
    float scl_inter;          // 116
    int16_t slice_end;        // 120
    char slice_code;          // 122
    char xyzt_units;          // 123
    float cal_max;            // 124
    float cal_min;            // 128
    float slice_duration;     // 132
    float toffset;            // 136
    int32_t glmax;            // 140
    int32_t glmin;            // 144
    char descrip[80];         // 148
    char aux_file[24];        // 228
    int16_t qform_code;       // 252
    int16_t sform_code;       // 254
    float quatern_b;          // 256
    float quatern_c;          // 260
    float quatern_d;          // 264
    float qoffset_x;          // 268
    float qoffset_y;          // 272
    float qoffset_z;          // 276
    float srow_x[4];          // 280
    float srow_y[4];          // 296
    float srow_z[4];          // 312
    char intent_name[16];     // 328
    char magic[4];            // 344: "n+1\0"
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "nifti1 header must be 348 bytes");

constexpr int16_t kDtUint8 = 2;
constexpr int16_t kDtInt16 = 4;
constexpr int16_t kDtFloat32 = 16;

// gzread is transparent for uncompressed files, so one read path covers both
// containers.
std::vector<uint8_t> read_file(const std::string& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw io_error("cannot open " + path);
    std::vector<uint8_t> out;
    uint8_t buf[1 << 16];
    int n;
    while ((n = gzread(f, buf, sizeof buf)) > 0) out.insert(out.end(), buf, buf + n);
    const bool failed = n < 0;
    gzclose(f);
    if (failed) throw io_error("read failure on " + path);
    return out;
}

void write_file(const std::string& path, const void* data, size_t len) {
    const bool gz = path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
    if (gz) {
        gzFile f = gzopen(path.c_str(), "wb");
        if (!f) throw io_error("cannot open " + path + " for writing");
        const uint8_t* p = static_cast<const uint8_t*>(data);
        size_t done = 0;
        while (done < len) {
            const unsigned chunk = static_cast<unsigned>(std::min<size_t>(len - done, 1u << 28));
            if (gzwrite(f, p + done, chunk) != static_cast<int>(chunk)) {
                gzclose(f);
                throw io_error("write failure on " + path);
            }
            done += chunk;
        }
        if (gzclose(f) != Z_OK) throw io_error("write failure on " + path);
    } else {
        FILE* f = std::fopen(path.c_str(), "wb");
        if (!f) throw io_error("cannot open " + path + " for writing");
        const bool ok = std::fwrite(data, 1, len, f) == len;
        if (std::fclose(f) != 0 || !ok) throw io_error("write failure on " + path);
    }
}

struct Parsed {
    Geometry geom;
    int16_t datatype;
    float slope, inter;
    const uint8_t* payload;
    size_t payload_len;
};

Parsed parse(const std::vector<uint8_t>& bytes, const std::string& path) {
    if (bytes.size() < sizeof(Nifti1Header))
        throw validation_error(path + ": file shorter than a nifti1 header");
    Nifti1Header h;
    std::memcpy(&h, bytes.data(), sizeof h);
    if (std::memcmp(h.magic, "n+1", 4) != 0)
        throw validation_error(path + ": bad magic (not a single-file nifti1 image)");
    if (h.sizeof_hdr != 348)
        throw validation_error(path + ": sizeof_hdr != 348");
    if (h.dim[0] != 3) {
        // 4D files with a trailing singleton are common exports; accept those.
        if (!(h.dim[0] == 4 && h.dim[4] == 1))
            throw validation_error(path + ": expected 3 spatial dimensions, got dim[0]=" +
                                   std::to_string(h.dim[0]));
    }

    Parsed p;
    // NIfTI stores (nx, ny, nz) = fastest..slowest; internally that is
    // shape (depth=nz, height=ny, width=nx).
    p.geom.shape = {h.dim[3], h.dim[2], h.dim[1]};
    p.geom.spacing = {h.pixdim[3], h.pixdim[2], h.pixdim[1]};
    p.geom.origin = {h.qoffset_z, h.qoffset_y, h.qoffset_x};
    p.geom.validate();
    p.datatype = h.datatype;
    p.slope = h.scl_slope;
    p.inter = h.scl_inter;

    int bytes_per;
    switch (h.datatype) {
        case kDtUint8: bytes_per = 1; break;
        case kDtInt16: bytes_per = 2; break;
        case kDtFloat32: bytes_per = 4; break;
        default:
            throw validation_error(path + ": unsupported datatype " +
                                   std::to_string(h.datatype));
    }
    if (h.bitpix != bytes_per * 8)
        throw validation_error(path + ": bitpix inconsistent with datatype");

    const auto off = static_cast<size_t>(h.vox_offset);
    if (h.vox_offset < 352 || static_cast<float>(off) != h.vox_offset)
        throw validation_error(path + ": bad vox_offset");
    const size_t need = static_cast<size_t>(p.geom.voxel_count()) * bytes_per;
    if (bytes.size() < off + need)
        throw validation_error(path + ": truncated payload");
    p.payload = bytes.data() + off;
    p.payload_len = need;
    return p;
}

template <typename T, typename F>
void decode(const Parsed& p, F&& emit) {
    const int64_t n = p.geom.voxel_count();
    const T* src = reinterpret_cast<const T*>(p.payload);
    for (int64_t i = 0; i < n; ++i) {
        T v;
        std::memcpy(&v, src + i, sizeof(T));
        emit(i, v);
    }
}

void fill_header(Nifti1Header& h, const Geometry& g, int16_t datatype, int16_t bitpix) {
    std::memset(&h, 0, sizeof h);
    h.sizeof_hdr = 348;
    h.regular = 'r';
    h.dim[0] = 3;
    h.dim[1] = static_cast<int16_t>(g.shape[2]);
    h.dim[2] = static_cast<int16_t>(g.shape[1]);
    h.dim[3] = static_cast<int16_t>(g.shape[0]);
    for (int i = 4; i < 8; ++i) h.dim[i] = 1;
    h.datatype = datatype;
    h.bitpix = bitpix;
    h.pixdim[0] = 1.0f;
    h.pixdim[1] = static_cast<float>(g.spacing[2]);
    h.pixdim[2] = static_cast<float>(g.spacing[1]);
    h.pixdim[3] = static_cast<float>(g.spacing[0]);
    h.vox_offset = 352.0f;
    h.scl_slope = 1.0f;
    h.scl_inter = 0.0f;
    h.xyzt_units = 2;  // millimetres
    std::strncpy(h.descrip, "cobra-engine", sizeof h.descrip - 1);
    h.qform_code = 1;
    h.quatern_b = h.quatern_c = h.quatern_d = 0.0f;  // identity orientation
    h.qoffset_x = static_cast<float>(g.origin[2]);
    h.qoffset_y = static_cast<float>(g.origin[1]);
    h.qoffset_z = static_cast<float>(g.origin[0]);
    std::memcpy(h.magic, "n+1", 4);
}

void write_image(const std::string& path, const Geometry& g, int16_t datatype,
                 int16_t bitpix, const void* payload, size_t payload_len) {
    Nifti1Header h;
    fill_header(h, g, datatype, bitpix);
    std::vector<uint8_t> bytes(352 + payload_len);  // 4 zero extension bytes
    std::memcpy(bytes.data(), &h, sizeof h);
    std::memcpy(bytes.data() + 352, payload, payload_len);
    write_file(path, bytes.data(), bytes.size());
}

}  // namespace

Volume read_volume(const std::string& path) {
    const auto bytes = read_file(path);
    const Parsed p = parse(bytes, path);
    const float slope = p.slope == 0.0f ? 1.0f : p.slope;
    const float inter = p.slope == 0.0f ? 0.0f : p.inter;

    Volume v(p.geom);
    auto emit = [&](int64_t i, auto raw) {
        v.data[i] = static_cast<float>(raw) * slope + inter;
    };
    switch (p.datatype) {
        case kDtUint8: decode<uint8_t>(p, emit); break;
        case kDtInt16: decode<int16_t>(p, emit); break;
        case kDtFloat32:
            if (slope == 1.0f && inter == 0.0f)
                std::memcpy(v.data.data(), p.payload, p.payload_len);  // bit-exact
            else
                decode<float>(p, emit);
            break;
    }
    return v;
}

void write_volume(const Volume& v, const std::string& path) {
    v.validate();
    write_image(path, v.geom, kDtFloat32, 32, v.data.data(), v.data.size() * 4);
}

LabelVolume read_labels(const std::string& path, int class_count) {
    const auto bytes = read_file(path);
    const Parsed p = parse(bytes, path);
    if (p.datatype == kDtFloat32)
        throw validation_error(path + ": label files must be integer-typed");

    LabelVolume lv(p.geom, class_count);
    auto emit = [&](int64_t i, auto raw) {
        if (raw < 0 || static_cast<int64_t>(raw) >= class_count)
            throw validation_error(path + ": label value " +
                                   std::to_string(static_cast<int64_t>(raw)) +
                                   " out of range for K=" + std::to_string(class_count));
        lv.data[i] = static_cast<uint8_t>(raw);
    };
    switch (p.datatype) {
        case kDtUint8: decode<uint8_t>(p, emit); break;
        case kDtInt16: decode<int16_t>(p, emit); break;
    }
    return lv;
}

void write_labels(const LabelVolume& lv, const std::string& path) {
    lv.validate();
    write_image(path, lv.geom, kDtUint8, 8, lv.data.data(), lv.data.size());
}

}  // namespace cobra
