#include "dmsort/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "binary_io.hpp"

namespace dmsort {

namespace {

constexpr char kEmbeddingMagic[4] = {'D', 'M', 'E', 'B'};
constexpr std::uint32_t kEmbeddingVersion = 1;

[[noreturn]] void fail(const std::filesystem::path& path, int line, const std::string& what) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + what);
}

std::ifstream open_in(const std::filesystem::path& path, bool binary = false) {
    std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
    if (!is) throw std::runtime_error("cannot open file: " + path.string());
    return is;
}

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
    if (!os) throw std::runtime_error("cannot open file for writing: " + path.string());
    return os;
}

// Splits on commas (whitespace tolerated) and parses every field as a finite
// double.
std::vector<double> parse_row(const std::string& raw, const std::filesystem::path& path, int line) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= raw.size()) {
        std::size_t end = raw.find(',', pos);
        if (end == std::string::npos) end = raw.size();
        std::string field = raw.substr(pos, end - pos);
        field.erase(0, field.find_first_not_of(" \t\r"));
        const auto last = field.find_last_not_of(" \t\r");
        field.erase(last == std::string::npos ? 0 : last + 1);
        if (field.empty()) fail(path, line, "empty field");
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(field, &used);
        } catch (const std::exception&) {
            fail(path, line, "non-numeric field '" + field + "'");
        }
        if (used != field.size()) fail(path, line, "non-numeric field '" + field + "'");
        if (!std::isfinite(v)) fail(path, line, "non-finite field '" + field + "'");
        out.push_back(v);
        pos = end + 1;
    }
    return out;
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; }

int as_int(double v, const std::filesystem::path& path, int line, const char* what) {
    if (v != std::floor(v) || std::abs(v) > 2e9) fail(path, line, std::string(what) + " must be an integer");
    return static_cast<int>(v);
}

std::vector<MotRecord> read_rows(const std::filesystem::path& path, bool drop_ignored) {
    std::ifstream is = open_in(path);
    std::vector<MotRecord> out;
    std::string raw;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        if (blank(raw)) continue;
        const auto f = parse_row(raw, path, line);
        if (f.size() < 7) fail(path, line, "expected at least 7 columns, got " + std::to_string(f.size()));
        const int frame = as_int(f[0], path, line, "frame");
        if (frame < 1) fail(path, line, "frame numbers start at 1");
        if (f[4] <= 0.0 || f[5] <= 0.0) fail(path, line, "width and height must be positive");
        if (drop_ignored && f[6] == 0.0) continue;
        MotRecord r;
        r.frame = frame - 1;
        r.id = as_int(f[1], path, line, "id");
        r.box = {f[2], f[3], f[4], f[5], drop_ignored ? 1.0 : f[6]};
        out.push_back(r);
    }
    return out;
}

std::string format_row(const MotRecord& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d,%d,%.2f,%.2f,%.2f,%.2f,%.4f,-1,-1,-1\n", r.frame + 1, r.id, r.box.x, r.box.y,
                  r.box.w, r.box.h, r.box.confidence);
    return buf;
}

Embedding to_unit(Embedding v, const std::filesystem::path& path, int line) {
    const double n = v.norm();
    if (!(n > 1e-12)) fail(path, line, "embedding has zero norm");
    return v / n;
}

}  // namespace

std::vector<MotRecord> read_mot(const std::filesystem::path& path) { return read_rows(path, false); }

std::vector<MotRecord> read_ground_truth(const std::filesystem::path& path) { return read_rows(path, true); }

FrameDetections read_detections(const std::filesystem::path& path) {
    FrameDetections out;
    for (const auto& r : read_mot(path)) out[r.frame].push_back(r.box);
    return out;
}

std::string format_results(std::vector<MotRecord> records) {
    std::stable_sort(records.begin(), records.end(), [](const MotRecord& a, const MotRecord& b) {
        return a.frame != b.frame ? a.frame < b.frame : a.id < b.id;
    });
    std::string out;
    for (const auto& r : records) {
        if (r.id < 1) throw std::invalid_argument("write_results: track ids must be >= 1");
        out += format_row(r);
    }
    return out;
}

std::vector<MotRecord> clip_to_image(std::vector<MotRecord> records, double width, double height) {
    if (!(width > 0.0) || !(height > 0.0)) throw std::invalid_argument("clip_to_image: image size must be positive");
    std::vector<MotRecord> out;
    out.reserve(records.size());
    for (auto& r : records) {
        const double x0 = std::clamp(r.box.x, 0.0, width), y0 = std::clamp(r.box.y, 0.0, height);
        const double x1 = std::clamp(r.box.right(), 0.0, width), y1 = std::clamp(r.box.bottom(), 0.0, height);
        if (x1 <= x0 || y1 <= y0) continue;
        r.box.x = x0;
        r.box.y = y0;
        r.box.w = x1 - x0;
        r.box.h = y1 - y0;
        out.push_back(r);
    }
    return out;
}

void write_results(const std::filesystem::path& path, const std::vector<MotRecord>& records) {
    std::ofstream os = open_out(path);
    os << format_results(records);
}

void write_detections(const std::filesystem::path& path, const std::vector<MotRecord>& records) {
    std::ofstream os = open_out(path);
    for (const auto& r : records) os << format_row(r);
}

EmbeddingTable read_embeddings(const std::filesystem::path& path) {
    std::ifstream is = open_in(path, true);
    using namespace detail;
    char magic[4];
    read_exact(is, magic, 4);
    if (!std::equal(magic, magic + 4, kEmbeddingMagic)) {
        throw std::runtime_error(path.string() + ": not an embedding file");
    }
    const std::uint32_t version = read_u32(is);
    if (version != kEmbeddingVersion) {
        throw std::runtime_error(path.string() + ": unsupported embedding file version " + std::to_string(version));
    }
    const std::uint32_t dim = read_u32(is);
    const std::uint64_t count = read_u64(is);
    if (dim == 0) throw std::runtime_error(path.string() + ": embedding dimension is zero");
    EmbeddingTable out;
    for (std::uint64_t i = 0; i < count; ++i) {
        const int record = static_cast<int>(i + 1);
        const std::int32_t frame = read_i32(is);
        const std::int32_t ordinal = read_i32(is);
        if (frame < 1 || ordinal < 0) fail(path, record, "invalid frame or ordinal");
        Embedding v(dim);
        for (std::uint32_t k = 0; k < dim; ++k) {
            const float x = read_f32(is);
            if (!std::isfinite(x)) fail(path, record, "non-finite embedding value");
            v[k] = x;
        }
        if (!out.emplace(std::pair{frame - 1, ordinal}, to_unit(std::move(v), path, record)).second) {
            fail(path, record, "duplicate embedding record");
        }
    }
    if (is.peek() != std::char_traits<char>::eof()) {
        throw std::runtime_error(path.string() + ": trailing bytes after the last embedding record");
    }
    return out;
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
    std::uint32_t dim = 0;
    for (const auto& [key, v] : table) {
        if (dim == 0) dim = static_cast<std::uint32_t>(v.size());
        if (static_cast<std::uint32_t>(v.size()) != dim) {
            throw std::invalid_argument("write_embeddings: dimensions " + std::to_string(dim) + " and " +
                                        std::to_string(v.size()) + " differ");
        }
    }
    std::ofstream os = open_out(path, true);
    using namespace detail;
    os.write(kEmbeddingMagic, 4);
    write_u32(os, kEmbeddingVersion);
    write_u32(os, dim);
    write_u64(os, table.size());
    for (const auto& [key, v] : table) {
        write_i32(os, key.first + 1);
        write_i32(os, key.second);
        for (Eigen::Index k = 0; k < v.size(); ++k) write_f32(os, static_cast<float>(v[k]));
    }
}

EmbeddingTable read_embeddings_csv(const std::filesystem::path& path) {
    std::ifstream is = open_in(path);
    EmbeddingTable out;
    std::string raw;
    int line = 0;
    Eigen::Index dim = -1;
    int dim_line = 0;
    while (std::getline(is, raw)) {
        ++line;
        if (blank(raw)) continue;
        const auto f = parse_row(raw, path, line);
        if (f.size() < 3) fail(path, line, "expected frame, ordinal and at least one value");
        const int frame = as_int(f[0], path, line, "frame");
        const int ordinal = as_int(f[1], path, line, "ordinal");
        if (frame < 1 || ordinal < 0) fail(path, line, "invalid frame or ordinal");
        const auto d = static_cast<Eigen::Index>(f.size() - 2);
        if (dim < 0) {
            dim = d;
            dim_line = line;
        } else if (d != dim) {
            fail(path, line, "embedding dimension " + std::to_string(d) + " differs from dimension " +
                                 std::to_string(dim) + " on line " + std::to_string(dim_line));
        }
        Embedding v(d);
        for (Eigen::Index k = 0; k < d; ++k) v[k] = f[static_cast<std::size_t>(k) + 2];
        if (!out.emplace(std::pair{frame - 1, ordinal}, to_unit(std::move(v), path, line)).second) {
            fail(path, line, "duplicate embedding record");
        }
    }
    return out;
}

const AffineTransform& CmcTable::at(int frame) const {
    static const AffineTransform identity;
    const auto it = rows_.find(frame);
    return it == rows_.end() ? identity : it->second;
}

CmcTable read_cmc(const std::filesystem::path& path) {
    std::ifstream is = open_in(path);
    CmcTable out;
    std::string raw;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        if (blank(raw)) continue;
        const auto f = parse_row(raw, path, line);
        if (f.size() != 7) fail(path, line, "expected frame and six coefficients");
        const int frame = as_int(f[0], path, line, "frame");
        if (frame < 1) fail(path, line, "frame numbers start at 1");
        try {
            out.set(frame - 1, AffineTransform({f[1], f[2], f[3], f[4], f[5], f[6]}));
        } catch (const std::invalid_argument& e) {
            fail(path, line, e.what());
        }
    }
    return out;
}

void write_cmc(const std::filesystem::path& path, const CmcTable& table) {
    std::ofstream os = open_out(path);
    for (const auto& [frame, a] : table.rows()) {
        const auto& c = a.coefficients();
        char buf[256];
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", frame + 1, c[0], c[1], c[2], c[3],
                      c[4], c[5]);
        os << buf;
    }
}

std::optional<SeqInfo> read_seqinfo(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) return std::nullopt;
    SeqInfo info;
    std::string raw;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        const auto eq = raw.find('=');
        if (eq == std::string::npos) continue;
        std::string k = raw.substr(0, eq), v = raw.substr(eq + 1);
        auto strip = [](std::string& s) {
            s.erase(0, s.find_first_not_of(" \t\r"));
            const auto e = s.find_last_not_of(" \t\r");
            s.erase(e == std::string::npos ? 0 : e + 1);
        };
        strip(k);
        strip(v);
        auto number = [&]() {
            try {
                return std::stoi(v);
            } catch (const std::exception&) {
                fail(path, line, "expected an integer for " + k);
            }
        };
        if (k == "name") info.name = v;
        else if (k == "imWidth") info.image_width = number();
        else if (k == "imHeight") info.image_height = number();
        else if (k == "seqLength") info.length = number();
    }
    if (info.image_width <= 0 || info.image_height <= 0) {
        throw std::runtime_error(path.string() + ": missing or invalid imWidth / imHeight");
    }
    return info;
}

void write_seqinfo(const std::filesystem::path& path, const SeqInfo& info) {
    std::ofstream os = open_out(path);
    os << "[Sequence]\n"
       << "name=" << info.name << "\n"
       << "imWidth=" << info.image_width << "\n"
       << "imHeight=" << info.image_height << "\n"
       << "seqLength=" << info.length << "\n";
}

}  // namespace dmsort
