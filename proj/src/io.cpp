#include "kite/io.hpp"

#include "kite/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

namespace kite::io {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kHeaderSize = 4 + 1 + 1 + 2 + 8 + 8;

void put_u8(std::vector<std::uint8_t> &out, std::uint8_t v) { out.push_back(v); }

void put_le(std::vector<std::uint8_t> &out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t offset, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in[offset + static_cast<std::size_t>(i)]) << (8 * i);
    return v;
}

bool has_extension(const fs::path &path, const char *ext) {
    std::string e = path.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return e == ext;
}

std::vector<std::string> split_csv_line(const std::string &line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    for (auto &f : fields) {
        const auto b = f.find_first_not_of(" \t");
        const auto e = f.find_last_not_of(" \t");
        f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
    }
    return fields;
}

double parse_number(const std::string &text, const std::string &where) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception &) {
        used = 0;
    }
    if (text.empty() || used != text.size()) raise(ErrorCode::SchemaError, "bad number '" + text + "' in " + where);
    return v;
}

long long parse_integer(const std::string &text, const std::string &where) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(text, &used);
    } catch (const std::exception &) {
        used = 0;
    }
    if (text.empty() || used != text.size()) raise(ErrorCode::SchemaError, "bad integer '" + text + "' in " + where);
    return v;
}

std::string float_text(float v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
    return buf;
}

void write_features_csv(const fs::path &path, const FeatureMatrix &features, const std::optional<LabelVector> &labels) {
    std::ostringstream out;
    out << "label";
    for (Eigen::Index c = 0; c < features.d(); ++c) out << ",f" << c;
    out << '\n';
    for (Eigen::Index r = 0; r < features.n(); ++r) {
        out << (labels ? (*labels)[static_cast<std::size_t>(r)] : -1);
        for (Eigen::Index c = 0; c < features.d(); ++c) {
            const auto v = static_cast<float>(features.data()(r, c));
            if (!std::isfinite(v)) raise(ErrorCode::NonFiniteValue, "value not finite in float32");
            out << ',' << float_text(v);
        }
        out << '\n';
    }
    write_text(path, out.str());
}

FeatureFile read_features_csv(const fs::path &path, Provenance provenance) {
    std::istringstream in(read_text(path));
    std::string line;
    if (!std::getline(in, line)) raise(ErrorCode::SchemaError, path.string() + ": empty CSV");
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "label") {
        raise(ErrorCode::SchemaError, path.string() + ": header must be label,f0,...");
    }
    const auto d = static_cast<Eigen::Index>(header.size() - 1);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::size_t with_label = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (static_cast<Eigen::Index>(fields.size()) != d + 1) raise(ErrorCode::SchemaError, where + ": wrong field count");
        const long long label = parse_integer(fields[0], where);
        if (label < -1) raise(ErrorCode::SchemaError, where + ": label must be >= -1");
        if (label >= 0) ++with_label;
        labels.push_back(static_cast<int>(label));
        std::vector<double> row;
        for (std::size_t c = 1; c < fields.size(); ++c) {
            const double v = parse_number(fields[c], where);
            if (!std::isfinite(v)) raise(ErrorCode::NonFiniteValue, where + ": non-finite value");
            row.push_back(static_cast<double>(static_cast<float>(v)));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) raise(ErrorCode::SchemaError, path.string() + ": no samples");
    if (with_label != 0 && with_label != rows.size()) {
        raise(ErrorCode::SchemaError, path.string() + ": labels present for some samples only");
    }
    Matrix data(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (Eigen::Index c = 0; c < d; ++c) data(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
    }
    FeatureFile file{FeatureMatrix(std::move(data), provenance), std::nullopt};
    if (with_label) file.labels = LabelVector(std::move(labels));
    return file;
}

std::string relative_to(const fs::path &p, const fs::path &base) {
    const auto rel = p.lexically_relative(base);
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    return p.generic_string();
}

fs::path resolve(const fs::path &base_dir, const std::string &p) {
    const fs::path path(p);
    return path.is_absolute() ? path : (base_dir / path).lexically_normal();
}

const nlohmann::json &require(const nlohmann::json &obj, const char *key, const std::string &where) {
    if (!obj.is_object() || !obj.contains(key)) raise(ErrorCode::SchemaError, where + ": missing '" + key + "'");
    return obj.at(key);
}

std::string require_string(const nlohmann::json &obj, const char *key, const std::string &where) {
    const auto &v = require(obj, key, where);
    if (!v.is_string() || v.get<std::string>().empty()) {
        raise(ErrorCode::SchemaError, where + ": '" + key + "' must be a non-empty string");
    }
    return v.get<std::string>();
}

long long require_positive(const nlohmann::json &obj, const char *key, const std::string &where) {
    const auto &v = require(obj, key, where);
    if (!v.is_number_integer() || v.get<long long>() < 1) {
        raise(ErrorCode::SchemaError, where + ": '" + key + "' must be a positive integer");
    }
    return v.get<long long>();
}

nlohmann::json parse_json_file(const fs::path &path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error &e) {
        raise(ErrorCode::SchemaError, path.string() + ": " + e.what());
    }
}

void require_file(const fs::path &p, const std::string &what) {
    if (!fs::is_regular_file(p)) raise(ErrorCode::MissingFile, what + ": " + p.string());
}

}  // namespace

std::vector<std::uint8_t> encode_features(const FeatureMatrix &features, const std::optional<LabelVector> &labels) {
    const auto n = static_cast<std::uint64_t>(features.n());
    const auto d = static_cast<std::uint64_t>(features.d());
    if (labels && labels->size() != n) raise(ErrorCode::ShapeMismatch, "labels and features differ in length");
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderSize + n * d * 4 + 1 + (labels ? n * 4 : 0));
    for (char c : {'K', 'F', 'E', 'A'}) put_u8(out, static_cast<std::uint8_t>(c));
    put_u8(out, kFeatureFormatVersion);
    put_u8(out, kDtypeFloat32);
    put_le(out, 0, 2);
    put_le(out, n, 8);
    put_le(out, d, 8);
    const Matrix &m = features.data();
    for (Eigen::Index r = 0; r < features.n(); ++r) {
        for (Eigen::Index c = 0; c < features.d(); ++c) {
            const auto v = static_cast<float>(m(r, c));
            if (!std::isfinite(v)) raise(ErrorCode::NonFiniteValue, "value not finite in float32");
            put_le(out, std::bit_cast<std::uint32_t>(v), 4);
        }
    }
    put_u8(out, labels ? 1 : 0);
    if (labels) {
        for (int y : labels->labels()) put_le(out, static_cast<std::uint32_t>(y), 4);
    }
    return out;
}

FeatureFile decode_features(std::span<const std::uint8_t> bytes, Provenance provenance) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "KFEA", 4) != 0) raise(ErrorCode::BadMagic, "not a KFEA file");
    if (bytes.size() < kHeaderSize) raise(ErrorCode::TruncatedPayload, "header truncated");
    if (bytes[4] != kFeatureFormatVersion) {
        raise(ErrorCode::UnsupportedVersion, "version " + std::to_string(bytes[4]));
    }
    if (bytes[5] != kDtypeFloat32) raise(ErrorCode::SchemaError, "unknown dtype code " + std::to_string(bytes[5]));
    const std::uint64_t n = get_le(bytes, 8, 8);
    const std::uint64_t d = get_le(bytes, 16, 8);
    if (n == 0 || d == 0) raise(ErrorCode::SchemaError, "n and d must be >= 1");
    // Compare declared sizes with what is actually present before allocating.
    const std::uint64_t available = bytes.size() - kHeaderSize;
    if (n > available / 4 || d > available / 4 / n) raise(ErrorCode::TruncatedPayload, "payload shorter than n*d");
    const std::uint64_t payload = n * d * 4;
    if (available < payload + 1) raise(ErrorCode::TruncatedPayload, "missing label flag");

    Matrix data(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    std::size_t off = kHeaderSize;
    for (std::uint64_t r = 0; r < n; ++r) {
        for (std::uint64_t c = 0; c < d; ++c, off += 4) {
            const auto v = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, off, 4)));
            if (!std::isfinite(v)) raise(ErrorCode::NonFiniteValue, "non-finite value in payload");
            data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = static_cast<double>(v);
        }
    }
    const std::uint8_t has_labels = bytes[off++];
    FeatureFile file{FeatureMatrix(std::move(data), provenance), std::nullopt};
    if (has_labels > 1) raise(ErrorCode::SchemaError, "label flag must be 0 or 1");
    if (has_labels == 1) {
        if (bytes.size() - off < n * 4) raise(ErrorCode::TruncatedPayload, "labels truncated");
        std::vector<int> labels(n);
        for (auto &y : labels) {
            const auto v = get_le(bytes, off, 4);
            off += 4;
            if (v > 0x7fffffffULL) raise(ErrorCode::SchemaError, "label out of range");
            y = static_cast<int>(v);
        }
        file.labels = LabelVector(std::move(labels));
    }
    if (off != bytes.size()) raise(ErrorCode::SchemaError, "trailing bytes after payload");
    return file;
}

void write_features(const fs::path &path, const FeatureMatrix &features, const std::optional<LabelVector> &labels) {
    if (has_extension(path, ".csv")) {
        write_features_csv(path, features, labels);
        return;
    }
    const auto bytes = encode_features(features, labels);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) raise(ErrorCode::IoError, "write failed: " + path.string());
}

FeatureFile read_features(const fs::path &path, Provenance provenance) {
    require_file(path, "feature file not found");
    if (has_extension(path, ".csv")) return read_features_csv(path, provenance);
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_features(bytes, provenance);
    } catch (const Error &e) {
        throw Error(e.code(), path.string() + ": " + e.message());
    }
}

LabelVector read_labels(const fs::path &path) {
    require_file(path, "label file not found");
    if (has_extension(path, ".txt")) {
        std::istringstream in(read_text(path));
        std::vector<int> labels;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto fields = split_csv_line(line);
            if (fields.size() == 1 && fields[0].empty()) continue;
            const auto v = parse_integer(fields[0], path.string() + ":" + std::to_string(line_no));
            if (v < 0) raise(ErrorCode::SchemaError, path.string() + ": negative label");
            labels.push_back(static_cast<int>(v));
        }
        if (labels.empty()) raise(ErrorCode::SchemaError, path.string() + ": no labels");
        return LabelVector(std::move(labels));
    }
    auto file = read_features(path);
    if (!file.labels) raise(ErrorCode::SchemaError, path.string() + ": file carries no labels");
    return *file.labels;
}

fs::path ManifestEntry::features_for(const std::string &target_id) const {
    if (const auto it = feature_files.find(target_id); it != feature_files.end()) return it->second;
    if (feature_file) return *feature_file;
    raise(ErrorCode::MissingFile, "model '" + model_id + "' has no features for target '" + target_id + "'");
}

ModelManifest parse_manifest(const nlohmann::json &doc, const fs::path &base_dir) {
    const auto &models = require(doc, "models", "manifest");
    if (!models.is_array() || models.empty()) raise(ErrorCode::SchemaError, "manifest: 'models' must be a non-empty array");
    ModelManifest manifest;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < models.size(); ++i) {
        const auto &m = models[i];
        const std::string where = "manifest models[" + std::to_string(i) + "]";
        ManifestEntry e;
        e.model_id = require_string(m, "model_id", where);
        if (!seen.insert(e.model_id).second) raise(ErrorCode::DuplicateModelId, "duplicate model_id '" + e.model_id + "'");
        if (m.contains("feature_file")) {
            e.feature_file = resolve(base_dir, require_string(m, "feature_file", where));
            require_file(*e.feature_file, where + " feature_file");
        }
        if (m.contains("feature_files")) {
            const auto &files = m.at("feature_files");
            if (!files.is_object()) raise(ErrorCode::SchemaError, where + ": 'feature_files' must be an object");
            for (const auto &[target, p] : files.items()) {
                if (!p.is_string()) raise(ErrorCode::SchemaError, where + ": feature path must be a string");
                const auto path = resolve(base_dir, p.get<std::string>());
                require_file(path, where + " feature_files[" + target + "]");
                e.feature_files.emplace(target, path);
            }
        }
        if (!e.feature_file && e.feature_files.empty()) {
            raise(ErrorCode::SchemaError, where + ": needs 'feature_file' or 'feature_files'");
        }
        e.architecture = m.value("architecture", std::string("unknown"));
        e.layers = require_positive(m, "layers", where);
        e.source_name = m.value("source_name", std::string("unknown"));
        e.source_size = require_positive(m, "source_size", where);
        manifest.models.push_back(std::move(e));
    }
    return manifest;
}

ModelManifest load_manifest(const fs::path &path) {
    require_file(path, "manifest not found");
    return parse_manifest(parse_json_file(path), path.parent_path());
}

void write_manifest(const fs::path &path, const ModelManifest &manifest) {
    const fs::path base = path.parent_path();
    nlohmann::json doc;
    auto &models = doc["models"] = nlohmann::json::array();
    for (const auto &e : manifest.models) {
        nlohmann::json m{{"model_id", e.model_id}};
        if (e.feature_file) m["feature_file"] = relative_to(*e.feature_file, base);
        if (!e.feature_files.empty()) {
            auto &files = m["feature_files"] = nlohmann::json::object();
            for (const auto &[t, p] : e.feature_files) files[t] = relative_to(p, base);
        }
        m["architecture"] = e.architecture;
        m["layers"] = e.layers;
        m["source_name"] = e.source_name;
        m["source_size"] = e.source_size;
        models.push_back(std::move(m));
    }
    write_text(path, doc.dump(2) + "\n");
}

std::vector<TargetEntry> load_targets(const fs::path &path) {
    require_file(path, "targets file not found");
    const auto doc = parse_json_file(path);
    const auto &list = require(doc, "targets", "targets file");
    if (!list.is_array() || list.empty()) raise(ErrorCode::SchemaError, "targets: 'targets' must be a non-empty array");
    std::vector<TargetEntry> out;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string where = "targets[" + std::to_string(i) + "]";
        TargetEntry t;
        t.target_id = require_string(list[i], "target_id", where);
        if (!seen.insert(t.target_id).second) raise(ErrorCode::SchemaError, "duplicate target_id '" + t.target_id + "'");
        t.features = resolve(path.parent_path(), require_string(list[i], "features", where));
        require_file(t.features, where + " features");
        if (list[i].contains("labels")) {
            t.labels = resolve(path.parent_path(), require_string(list[i], "labels", where));
            require_file(*t.labels, where + " labels");
        }
        if (list[i].contains("size")) t.size = require_positive(list[i], "size", where);
        out.push_back(std::move(t));
    }
    return out;
}

void write_targets(const fs::path &path, const std::vector<TargetEntry> &targets) {
    const fs::path base = path.parent_path();
    nlohmann::json doc;
    auto &list = doc["targets"] = nlohmann::json::array();
    for (const auto &t : targets) {
        nlohmann::json j{{"target_id", t.target_id}, {"features", relative_to(t.features, base)}};
        if (t.labels) j["labels"] = relative_to(*t.labels, base);
        if (t.size) j["size"] = *t.size;
        list.push_back(std::move(j));
    }
    write_text(path, doc.dump(2) + "\n");
}

ScoreTable parse_score_table(const std::string &text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) raise(ErrorCode::SchemaError, "score table is empty");
    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "model_id" || header[1] != "target_id" ||
        (header[2] != "accuracy" && header[2] != "accuracy_percent")) {
        raise(ErrorCode::SchemaError, "score table header must start with model_id,target_id,accuracy[_percent]");
    }
    ScoreTable table(header[2] == "accuracy_percent" ? AccuracyUnit::percent : AccuracyUnit::fraction);
    const double hi = table.unit() == AccuracyUnit::percent ? 100.0 : 1.0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        const std::string where = "score table line " + std::to_string(line_no);
        if (fields.size() != header.size()) raise(ErrorCode::SchemaError, where + ": wrong field count");
        ScoreRow row;
        row.model_id = fields[0];
        row.target_id = fields[1];
        if (row.model_id.empty() || row.target_id.empty()) raise(ErrorCode::SchemaError, where + ": empty id");
        row.accuracy = parse_number(fields[2], where);
        if (!(row.accuracy >= 0.0 && row.accuracy <= hi)) {
            raise(ErrorCode::SchemaError, where + ": accuracy outside [0, " + std::to_string(hi) + "]");
        }
        for (std::size_t c = 3; c < header.size(); ++c) row.scores[header[c]] = parse_number(fields[c], where);
        table.add(std::move(row));
    }
    if (table.rows().empty()) raise(ErrorCode::SchemaError, "score table has no rows");
    return table;
}

ScoreTable load_score_table(const fs::path &path) {
    require_file(path, "score table not found");
    try {
        return parse_score_table(read_text(path));
    } catch (const Error &e) {
        throw Error(e.code(), path.string() + ": " + e.message());
    }
}

std::string format_ground_truth(const std::vector<ScoreRow> &rows, AccuracyUnit unit) {
    std::ostringstream out;
    out << "model_id,target_id," << (unit == AccuracyUnit::percent ? "accuracy_percent" : "accuracy") << '\n';
    for (const auto &r : rows) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", r.accuracy);
        out << r.model_id << ',' << r.target_id << ',' << buf << '\n';
    }
    return out.str();
}

std::string read_text(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::MissingFile, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path &path, const std::string &text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
    if (!out) raise(ErrorCode::IoError, "write failed: " + path.string());
}

}  // namespace kite::io
