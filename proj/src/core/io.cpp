#include "fmrigen/core/io.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "payload I/O assumes a little-endian host");

namespace fmrigen::core {

using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
    return j;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

template <class T>
void write_payload(const std::string& path, const std::vector<T>& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(T)));
    if (!out) throw IoError("write failed for " + path);
}

template <class T>
std::vector<T> read_payload(const std::string& path, int64_t expect_count) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open " + path);
    const int64_t bytes = static_cast<int64_t>(in.tellg());
    const int64_t expect_bytes = expect_count * static_cast<int64_t>(sizeof(T));
    if (bytes != expect_bytes)
        throw FormatError(path + ": payload is " + std::to_string(bytes) + " bytes, expected " +
                          std::to_string(expect_bytes));
    in.seekg(0);
    std::vector<T> data(static_cast<size_t>(expect_count));
    in.read(reinterpret_cast<char*>(data.data()), expect_bytes);
    if (!in) throw IoError("read failed for " + path);
    return data;
}

void check_version(const json& j, const std::string& path) {
    if (!j.contains("format_version") || !j["format_version"].is_number_integer())
        throw FormatError(path + ": missing format_version");
    const int v = j["format_version"].get<int>();
    if (v != 1) throw FormatError(path + ": unsupported format_version " + std::to_string(v));
}

} // namespace

void write_vseq(const VolumeSequence& seq, const std::string& stem) {
    seq.validate();
    json j;
    j["format_version"] = 1;
    j["dims"] = {seq.t, seq.d, seq.h, seq.w};
    j["voxel_size_mm"] = {seq.voxel_size_mm[0], seq.voxel_size_mm[1], seq.voxel_size_mm[2]};
    j["frame_interval_s"] = seq.frame_interval_s;
    if (seq.label)
        j["label"] = label_name(*seq.label);
    else
        j["label"] = nullptr;
    j["subject_id"] = seq.subject_id;
    write_text_file(stem + ".json", j.dump(2) + "\n");
    write_payload(stem + ".f32", seq.data);
}

VolumeSequence read_vseq(const std::string& stem) {
    const std::string hpath = stem + ".json";
    json j = read_json_file(hpath);
    check_version(j, hpath);
    VolumeSequence seq;
    try {
        const auto dims = j.at("dims");
        if (!dims.is_array() || dims.size() != 4)
            throw FormatError(hpath + ": dims must be [T,D,H,W]");
        seq.t = dims[0].get<int>();
        seq.d = dims[1].get<int>();
        seq.h = dims[2].get<int>();
        seq.w = dims[3].get<int>();
        const auto vox = j.at("voxel_size_mm");
        for (int i = 0; i < 3; ++i) seq.voxel_size_mm[static_cast<size_t>(i)] = vox.at(static_cast<size_t>(i)).get<double>();
        seq.frame_interval_s = j.at("frame_interval_s").get<double>();
        if (!j.at("label").is_null()) seq.label = parse_label(j.at("label").get<std::string>());
        seq.subject_id = j.at("subject_id").get<std::string>();
    } catch (const json::exception& e) {
        throw FormatError(hpath + ": " + e.what());
    }
    if (seq.t < 1 || seq.d < 1 || seq.h < 1 || seq.w < 1)
        throw ValidationError(hpath + ": dims must all be >= 1");
    seq.data = read_payload<float>(stem + ".f32", seq.total());
    seq.validate();
    return seq;
}

void write_parcellation(const Parcellation& p, const std::string& stem) {
    p.validate();
    json j;
    j["format_version"] = 1;
    j["dims"] = {p.d, p.h, p.w};
    json names = json::object();
    for (const auto& [id, name] : p.region_names) names[std::to_string(id)] = name;
    j["region_names"] = names;
    write_text_file(stem + ".json", j.dump(2) + "\n");
    write_payload(stem + ".i32", p.labels);
}

Parcellation read_parcellation(const std::string& stem) {
    const std::string hpath = stem + ".json";
    json j = read_json_file(hpath);
    check_version(j, hpath);
    Parcellation p;
    try {
        const auto dims = j.at("dims");
        if (!dims.is_array() || dims.size() != 3)
            throw FormatError(hpath + ": dims must be [D,H,W]");
        p.d = dims[0].get<int>();
        p.h = dims[1].get<int>();
        p.w = dims[2].get<int>();
        for (const auto& [key, val] : j.at("region_names").items())
            p.region_names[static_cast<int32_t>(std::stol(key))] = val.get<std::string>();
    } catch (const json::exception& e) {
        throw FormatError(hpath + ": " + e.what());
    }
    if (p.d < 1 || p.h < 1 || p.w < 1) throw ValidationError(hpath + ": dims must all be >= 1");
    p.labels = read_payload<int32_t>(stem + ".i32", p.total());
    p.validate();
    return p;
}

void write_schedule(const StimulusSchedule& s, const std::string& path) {
    s.validate();
    std::ostringstream os;
    os << "lag_frames: " << s.lag_frames << "\n";
    for (Cond c : s.conditions) os << cond_name(c) << "\n";
    write_text_file(path, os.str());
}

StimulusSchedule read_schedule(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("lag_frames:", 0) != 0)
        throw FormatError(path + ": first line must be 'lag_frames: N'");
    StimulusSchedule s;
    try {
        s.lag_frames = std::stoi(line.substr(11));
    } catch (const std::exception&) {
        throw FormatError(path + ": cannot parse lag_frames value");
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        s.conditions.push_back(parse_cond(line));
    }
    s.validate();
    return s;
}

} // namespace fmrigen::core
