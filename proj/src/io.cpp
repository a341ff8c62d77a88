#include "fiqopt/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "fiqopt/rng.hpp"

namespace fiqopt {

namespace {

constexpr char kMagic[4] = {'F', 'E', 'M', 'B'};
constexpr std::uint32_t kFormatVersion = 1;

void append_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void append_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_f32(std::string& out, float v) { append_u32(out, std::bit_cast<std::uint32_t>(v)); }

// Cursor over an in-memory file image with bounds-checked little-endian reads.
class ByteReader {
public:
    ByteReader(const std::string& data, const std::filesystem::path& path) : data_(data), path_(path) {}

    std::uint16_t u16() {
        const unsigned char* p = raw(2);
        return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    }

    std::uint32_t u32() {
        const unsigned char* p = raw(4);
        return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
               static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
    }

    std::uint64_t u64() {
        const std::uint64_t lo = u32();
        const std::uint64_t hi = u32();
        return lo | (hi << 32);
    }

    float f32() { return std::bit_cast<float>(u32()); }

    std::string bytes(std::size_t n) {
        const unsigned char* p = raw(n);
        return std::string(reinterpret_cast<const char*>(p), n);
    }

    std::size_t remaining() const { return data_.size() - pos_; }

private:
    const unsigned char* raw(std::size_t n) {
        if (data_.size() - pos_ < n)
            throw ValidationError("truncated embedding file: " + path_.string());
        const auto* p = reinterpret_cast<const unsigned char*>(data_.data()) + pos_;
        pos_ += n;
        return p;
    }

    const std::string& data_;
    const std::filesystem::path& path_;
    std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("cannot read file: " + path.string());
    return std::move(buf).str();
}

void write_file(const std::filesystem::path& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open file for writing: " + path.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw IoError("cannot write file: " + path.string());
}

void check_unique(std::unordered_set<std::string>& seen, const std::string& image_id,
                  const std::filesystem::path& path) {
    if (!seen.insert(image_id).second)
        throw ValidationError("duplicate image_id '" + image_id + "' in " + path.string());
}

std::vector<EmbeddingRecord> parse_binary(const std::string& data, const std::filesystem::path& path) {
    ByteReader r(data, path);
    if (r.bytes(4) != std::string(kMagic, 4))
        throw ValidationError("magic mismatch, not an FEMB file: " + path.string());
    const std::uint32_t version = r.u32();
    if (version != kFormatVersion)
        throw ValidationError("unsupported FEMB version " + std::to_string(version) + " in " + path.string());
    const std::uint64_t count = r.u64();
    const std::uint32_t dim = r.u32();
    if (count > 0 && dim < 2)
        throw ValidationError("embedding dimension must be >= 2 in " + path.string());

    std::vector<EmbeddingRecord> records;
    records.reserve(count);
    std::unordered_set<std::string> seen;
    for (std::uint64_t i = 0; i < count; ++i) {
        EmbeddingRecord rec;
        rec.image_id = r.bytes(r.u16());
        rec.identity_id = r.bytes(r.u16());
        if (rec.image_id.empty())
            throw ValidationError("empty image_id in " + path.string());
        if (rec.identity_id.empty())
            throw ValidationError("empty identity_id for image '" + rec.image_id + "' in " + path.string());
        check_unique(seen, rec.image_id, path);
        rec.vector.resize(dim);
        for (std::uint32_t d = 0; d < dim; ++d) {
            rec.vector[d] = r.f32();
            if (!std::isfinite(rec.vector[d]))
                throw ValidationError("non-finite component for image '" + rec.image_id + "' in " + path.string());
        }
        records.push_back(std::move(rec));
    }
    if (r.remaining() != 0)
        throw ValidationError("trailing bytes after last record in " + path.string());
    return records;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

// Reads lines from a file image, stripping one trailing '\r' per line.
std::vector<std::string> read_lines(const std::string& data) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < data.size()) {
        std::size_t end = data.find('\n', start);
        if (end == std::string::npos) end = data.size();
        std::string line = data.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
        start = end + 1;
    }
    return lines;
}

float parse_f32(const std::string& token, std::size_t line_no, const std::filesystem::path& path) {
    float value = 0.0f;
    const char* begin = token.data();
    const char* end = begin + token.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        throw ValidationError("bad float '" + token + "' at line " + std::to_string(line_no) + " of " + path.string());
    if (!std::isfinite(value))
        throw ValidationError("non-finite value at line " + std::to_string(line_no) + " of " + path.string());
    return value;
}

std::vector<EmbeddingRecord> parse_csv(const std::string& data, const std::filesystem::path& path) {
    const std::vector<std::string> lines = read_lines(data);
    if (lines.empty()) throw ValidationError("missing header in " + path.string());
    const std::vector<std::string> header = split_csv_line(lines[0]);
    if (header.size() < 4 || header[0] != "image_id" || header[1] != "identity_id")
        throw ValidationError("bad embedding CSV header in " + path.string());
    const std::size_t dim = header.size() - 2;
    for (std::size_t d = 0; d < dim; ++d) {
        if (header[d + 2] != "v" + std::to_string(d))
            throw ValidationError("bad embedding CSV header in " + path.string());
    }

    std::vector<EmbeddingRecord> records;
    std::unordered_set<std::string> seen;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty() && i + 1 == lines.size()) break;
        const std::vector<std::string> fields = split_csv_line(lines[i]);
        if (fields.size() != dim + 2)
            throw ValidationError("dimension mismatch at line " + std::to_string(i + 1) + " of " + path.string());
        EmbeddingRecord rec;
        rec.image_id = fields[0];
        rec.identity_id = fields[1];
        if (rec.image_id.empty())
            throw ValidationError("empty image_id at line " + std::to_string(i + 1) + " of " + path.string());
        if (rec.identity_id.empty())
            throw ValidationError("empty identity_id at line " + std::to_string(i + 1) + " of " + path.string());
        check_unique(seen, rec.image_id, path);
        rec.vector.reserve(dim);
        for (std::size_t d = 0; d < dim; ++d) rec.vector.push_back(parse_f32(fields[d + 2], i + 1, path));
        records.push_back(std::move(rec));
    }
    return records;
}

void check_id_writable(const std::string& id, const char* what, bool csv) {
    if (id.size() > std::numeric_limits<std::uint16_t>::max())
        throw ValidationError(std::string(what) + " too long to serialize: '" + id.substr(0, 32) + "...'");
    if (csv && (id.find(',') != std::string::npos || id.find('\n') != std::string::npos ||
                id.find('\r') != std::string::npos))
        throw ValidationError(std::string(what) + " contains a CSV delimiter: '" + id + "'");
}

}  // namespace

std::string format_float32(float v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::vector<EmbeddingRecord> load_embeddings(const std::filesystem::path& path) {
    const std::string data = read_file(path);
    if (data.size() >= 4 && std::memcmp(data.data(), kMagic, 4) == 0) return parse_binary(data, path);
    return parse_csv(data, path);
}

void write_embeddings_binary(const std::filesystem::path& path, std::span<const EmbeddingRecord> records) {
    const std::size_t dim = records.empty() ? 0 : records.front().vector.size();
    std::string out;
    out.append(kMagic, 4);
    append_u32(out, kFormatVersion);
    append_u64(out, records.size());
    append_u32(out, static_cast<std::uint32_t>(dim));
    for (const EmbeddingRecord& rec : records) {
        if (rec.vector.size() != dim)
            throw ValidationError("dimension mismatch for image '" + rec.image_id + "'");
        check_id_writable(rec.image_id, "image_id", false);
        check_id_writable(rec.identity_id, "identity_id", false);
        append_u16(out, static_cast<std::uint16_t>(rec.image_id.size()));
        out.append(rec.image_id);
        append_u16(out, static_cast<std::uint16_t>(rec.identity_id.size()));
        out.append(rec.identity_id);
        for (float v : rec.vector) append_f32(out, v);
    }
    write_file(path, out);
}

void write_embeddings_csv(const std::filesystem::path& path, std::span<const EmbeddingRecord> records) {
    const std::size_t dim = records.empty() ? 0 : records.front().vector.size();
    std::string out = "image_id,identity_id";
    for (std::size_t d = 0; d < dim; ++d) out += ",v" + std::to_string(d);
    out += '\n';
    for (const EmbeddingRecord& rec : records) {
        if (rec.vector.size() != dim)
            throw ValidationError("dimension mismatch for image '" + rec.image_id + "'");
        check_id_writable(rec.image_id, "image_id", true);
        check_id_writable(rec.identity_id, "identity_id", true);
        out += rec.image_id;
        out += ',';
        out += rec.identity_id;
        for (float v : rec.vector) {
            out += ',';
            out += format_float32(v);
        }
        out += '\n';
    }
    write_file(path, out);
}

QualityTable load_quality_scores(const std::filesystem::path& path) {
    const std::string data = read_file(path);
    const std::vector<std::string> lines = read_lines(data);
    if (lines.empty()) throw ValidationError("missing header in " + path.string());
    if (lines[0] != "image_id,score")
        throw ValidationError("bad score CSV header in " + path.string());
    QualityTable table;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty() && i + 1 == lines.size()) break;
        const std::vector<std::string> fields = split_csv_line(lines[i]);
        if (fields.size() != 2)
            throw ValidationError("expected two fields at line " + std::to_string(i + 1) + " of " + path.string());
        if (fields[0].empty())
            throw ValidationError("empty image_id at line " + std::to_string(i + 1) + " of " + path.string());
        table.insert(fields[0], static_cast<double>(parse_f32(fields[1], i + 1, path)));
    }
    return table;
}

void write_quality_scores(std::ostream& out, const QualityTable& table) {
    out << "image_id,score\n";
    for (const auto& [image_id, score] : table.entries()) {
        check_id_writable(image_id, "image_id", true);
        out << image_id << ',' << format_float32(static_cast<float>(score)) << '\n';
    }
}

void write_quality_scores(const std::filesystem::path& path, const QualityTable& table) {
    std::ostringstream buf;
    write_quality_scores(buf, table);
    write_file(path, std::move(buf).str());
}

std::string digest_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path.string());
    Fnv1a64 hash;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) hash.update(buf, static_cast<std::size_t>(in.gcount()));
    if (in.bad()) throw IoError("cannot read file: " + path.string());
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash.digest()));
    return std::string("fnv1a:") + hex;
}

}  // namespace fiqopt
