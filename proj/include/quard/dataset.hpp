/*
 * Copyright (c) 2026 The quard authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

// Episode store: length-prefixed binary records in per-writer shards,
// content-addressed PPM frames and a JSON manifest. See docs/format.md.

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "quard/action_codec.hpp"
#include "quard/episode.hpp"
#include "quard/error.hpp"
#include "quard/instruction.hpp"
#include "quard/random.hpp"
#include "quard/types.hpp"
#include "quard/world_sim.hpp"

namespace quard {

namespace fs = std::filesystem;

inline constexpr int kFormatVersion = 1;
inline constexpr std::array<char, 4> kRecordMagic = {'Q', 'R', 'E', 'C'};
inline constexpr std::uint16_t kRecordVersion = 1;

// ---- hashing -------------------------------------------------------------------

using Digest = std::array<std::uint8_t, 32>;

inline Digest sha256(std::string_view bytes) {
    Digest d{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), d.data(), &len, EVP_sha256(), nullptr) != 1 ||
        len != d.size()) {
        throw StoreError("SHA-256 computation failed");
    }
    return d;
}

inline std::string to_hex(const Digest& d) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string s;
    s.reserve(64);
    for (auto b : d) {
        s += kHex[b >> 4];
        s += kHex[b & 15];
    }
    return s;
}

inline std::string sha256_hex(std::string_view bytes) { return to_hex(sha256(bytes)); }

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw StoreError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw StoreError("read failed: " + p.string());
    return ss.str();
}

// Write to a sibling temp file, then rename over the destination.
inline void write_file_atomic(const fs::path& p, std::string_view bytes, std::string_view tag = "") {
    fs::path tmp = p;
    tmp += ".tmp";
    tmp += tag;
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw StoreError("cannot create " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw StoreError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, p, ec);
    if (ec) throw StoreError("rename to " + p.string() + " failed: " + ec.message());
}

// ---- binary codec ----------------------------------------------------------------

namespace detail {

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) { put_le(v, 2); }
    void u32(std::uint32_t v) { put_le(v, 4); }
    void u64(std::uint64_t v) { put_le(v, 8); }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.append(s);
    }
    void raw(std::string_view s) { buf_.append(s); }
    std::string& bytes() { return buf_; }

private:
    void put_le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    std::string buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::string_view b) : b_(b) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get_le(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
    std::uint64_t u64() { return get_le(8); }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const auto n = u32();
        return std::string(take(n));
    }
    std::string_view take(std::size_t n) {
        if (n > b_.size() - pos_) throw StoreError("truncated record");
        auto s = b_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool at_end() const { return pos_ == b_.size(); }
    std::size_t pos() const { return pos_; }

private:
    std::uint64_t get_le(int n) {
        const auto s = take(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(s[i])) << (8 * i);
        return v;
    }
    std::string_view b_;
    std::size_t pos_ = 0;
};

inline void put_pose(ByteWriter& w, const Pose2& p) {
    w.f64(p.x);
    w.f64(p.y);
    w.f64(p.yaw);
}

inline Pose2 get_pose(ByteReader& r) {
    Pose2 p;
    p.x = r.f64();
    p.y = r.f64();
    p.yaw = r.f64();
    return p;
}

template <typename E, std::size_t N>
E get_enum(ByteReader& r, const std::array<std::string_view, N>&, const char* what) {
    const auto v = r.u8();
    if (v >= N) throw StoreError(std::string("bad ") + what + " code " + std::to_string(v));
    return static_cast<E>(v);
}

} // namespace detail

inline std::string encode_episode(const Episode& e) {
    detail::ByteWriter w;
    w.u16(kRecordVersion);
    w.str(e.id);
    w.str(e.instruction.text);
    w.str(e.instruction.template_id);
    const auto& t = e.instruction.spec;
    w.u8(static_cast<std::uint8_t>(t.skill));
    w.str(t.object.category);
    w.u8(static_cast<std::uint8_t>(t.object.color));
    w.u8(static_cast<std::uint8_t>(t.object.letter));
    w.u8(static_cast<std::uint8_t>(t.speed));
    w.u8(static_cast<std::uint8_t>(t.gait));
    w.u8(static_cast<std::uint8_t>(t.split));
    w.u8(static_cast<std::uint8_t>(e.source));
    w.u64(e.seed);
    w.u8(e.unplannable ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(e.outcome.status));
    w.f64(e.outcome.distance_to_target);
    w.str(e.outcome.violation);
    detail::put_pose(w, e.final_pose);
    w.str(to_json(e.scene).dump());
    w.u32(static_cast<std::uint32_t>(e.steps.size()));
    for (const auto& s : e.steps) {
        w.str(s.frame);
        for (int tok : s.tokens.tokens) w.i32(tok);
        for (double v : s.command.continuous()) w.f64(v);
        w.u8(s.command.terminate ? 1 : 0);
        detail::put_pose(w, s.pose);
    }
    return std::move(w.bytes());
}

inline Episode decode_episode(std::string_view payload) {
    detail::ByteReader r(payload);
    const auto version = r.u16();
    if (version != kRecordVersion) {
        throw StoreError("unsupported record version " + std::to_string(version));
    }
    Episode e;
    e.id = r.str();
    e.instruction.text = r.str();
    e.instruction.template_id = r.str();
    auto& t = e.instruction.spec;
    t.skill = detail::get_enum<Skill>(r, kSkillNames, "skill");
    t.object.category = r.str();
    t.object.color = detail::get_enum<Color>(r, kColorNames, "color");
    t.object.letter = static_cast<char>(r.u8());
    t.speed = detail::get_enum<SpeedLevel>(r, kSpeedNames, "speed");
    t.gait = detail::get_enum<Gait>(r, kGaitNames, "gait");
    t.split = detail::get_enum<Split>(r, kSplitNames, "split");
    e.source = detail::get_enum<Source>(r, kSourceNames, "source");
    e.seed = r.u64();
    e.unplannable = r.u8() != 0;
    e.outcome.status = detail::get_enum<Status>(r, kStatusNames, "status");
    e.outcome.distance_to_target = r.f64();
    e.outcome.violation = r.str();
    e.final_pose = detail::get_pose(r);
    try {
        e.scene = scene_from_json(nlohmann::json::parse(r.str()));
    } catch (const nlohmann::json::exception& ex) {
        throw StoreError(std::string("scene: ") + ex.what());
    } catch (const ConfigError& ex) {
        throw StoreError(ex.what());
    }
    const auto n = r.u32();
    e.steps.resize(n);
    for (auto& s : e.steps) {
        s.frame = r.str();
        for (int& tok : s.tokens.tokens) tok = r.i32();
        std::array<double, kContinuousDims> v{};
        for (double& x : v) x = r.f64();
        s.command = ActionCommand::from_continuous(v, r.u8() != 0);
        s.pose = detail::get_pose(r);
    }
    if (!r.at_end()) throw StoreError("trailing bytes in record");
    return e;
}

// magic | u64 LE payload length | payload | SHA-256(payload)
inline std::string frame_record(const std::string& payload) {
    detail::ByteWriter w;
    w.raw({kRecordMagic.data(), kRecordMagic.size()});
    w.u64(payload.size());
    w.raw(payload);
    const auto d = sha256(payload);
    w.raw({reinterpret_cast<const char*>(d.data()), d.size()});
    return std::move(w.bytes());
}

// Splits a shard into verified payloads. Throws on bad magic, truncation or
// checksum mismatch.
inline std::vector<std::string_view> split_records(std::string_view shard, const std::string& label) {
    std::vector<std::string_view> out;
    detail::ByteReader r(shard);
    while (!r.at_end()) {
        const auto at = r.pos();
        const auto magic = r.take(kRecordMagic.size());
        if (!std::equal(magic.begin(), magic.end(), kRecordMagic.begin())) {
            throw StoreError(label + ": bad record magic at offset " + std::to_string(at));
        }
        const auto len = r.u64();
        if (len > shard.size()) throw StoreError(label + ": truncated record at offset " + std::to_string(at));
        const auto payload = r.take(static_cast<std::size_t>(len));
        const auto sum = r.take(32);
        const auto d = sha256(payload);
        if (!std::equal(d.begin(), d.end(), reinterpret_cast<const std::uint8_t*>(sum.data()))) {
            throw StoreError(label + ": checksum mismatch in record at offset " + std::to_string(at));
        }
        out.push_back(payload);
    }
    return out;
}

// ---- validation -------------------------------------------------------------------

// Throws StoreError naming the offending field path.
inline void validate_episode(const Episode& e, const ActionSpaceSpec& spec) {
    if (e.id.empty()) throw StoreError("episode.id: empty");
    if (e.steps.empty()) throw StoreError("episode[" + e.id + "].steps: empty");
    if (!e.frames.empty() && e.frames.size() != e.steps.size()) {
        throw StoreError("episode[" + e.id + "].frames: " + std::to_string(e.frames.size()) +
                         " frames for " + std::to_string(e.steps.size()) + " steps");
    }
    for (std::size_t i = 0; i < e.steps.size(); ++i) {
        const std::string path = "episode[" + e.id + "].steps[" + std::to_string(i) + "]";
        try {
            validate_tokens(e.steps[i].tokens, spec);
        } catch (const CodecError& ex) {
            throw StoreError(path + ".tokens[" + ex.dimension() + "]: " + ex.what());
        }
        if (e.frames.empty() && e.steps[i].frame.size() != 64) {
            throw StoreError(path + ".frame: missing frame reference");
        }
        const bool t = detokenize(e.steps[i].tokens, spec).terminate;
        const bool last = i + 1 == e.steps.size();
        if (e.succeeded() && t != last) {
            throw StoreError(path + ".tokens[t]: successful episodes terminate exactly at the last step");
        }
    }
}

// ---- manifest -----------------------------------------------------------------------

struct ShardInfo {
    std::string file; // relative to the store root
    std::size_t episodes = 0;
    std::uint64_t bytes = 0;
    std::string sha256;

    friend bool operator==(const ShardInfo&, const ShardInfo&) = default;
};

struct DatasetManifest {
    int format_version = kFormatVersion;
    ActionSpaceSpec action_space = ActionSpaceSpec::defaults();
    RateConfig rates;
    std::size_t episode_count = 0;
    std::map<std::string, std::size_t> task_counts;   // skill name
    std::map<std::string, std::size_t> source_counts; // sim, real
    std::map<std::string, std::size_t> split_counts;
    std::map<std::string, std::size_t> outcome_counts;
    std::vector<ShardInfo> shards;

    void count(const Episode& e) {
        ++episode_count;
        ++task_counts[std::string(name(e.task().skill))];
        ++source_counts[std::string(name(e.source))];
        ++split_counts[std::string(name(e.task().split))];
        ++outcome_counts[e.unplannable ? "unplannable" : std::string(name(e.outcome.status))];
    }

    nlohmann::json to_json() const {
        nlohmann::json sh = nlohmann::json::array();
        for (const auto& s : shards) {
            sh.push_back({{"file", s.file}, {"episodes", s.episodes}, {"bytes", s.bytes}, {"sha256", s.sha256}});
        }
        return {{"format_version", format_version},
                {"action_space", quard::to_json(action_space)},
                {"rates", {{"f_high", rates.f_high}, {"f_low", rates.f_low}}},
                {"episode_count", episode_count},
                {"counts",
                 {{"task", task_counts},
                  {"source", source_counts},
                  {"split", split_counts},
                  {"outcome", outcome_counts}}},
                {"shards", sh}};
    }

    static DatasetManifest from_json(const nlohmann::json& j) {
        DatasetManifest m;
        try {
            m.format_version = j.at("format_version").get<int>();
            if (m.format_version != kFormatVersion) {
                throw StoreError("unsupported format_version " + std::to_string(m.format_version));
            }
            m.action_space = action_space_from_json(j.at("action_space"));
            m.rates.f_high = j.at("rates").at("f_high").get<double>();
            m.rates.f_low = j.at("rates").at("f_low").get<double>();
            m.episode_count = j.at("episode_count").get<std::size_t>();
            const auto& c = j.at("counts");
            m.task_counts = c.at("task").get<std::map<std::string, std::size_t>>();
            m.source_counts = c.at("source").get<std::map<std::string, std::size_t>>();
            m.split_counts = c.at("split").get<std::map<std::string, std::size_t>>();
            m.outcome_counts = c.at("outcome").get<std::map<std::string, std::size_t>>();
            for (const auto& s : j.at("shards")) {
                m.shards.push_back({s.at("file").get<std::string>(), s.at("episodes").get<std::size_t>(),
                                    s.at("bytes").get<std::uint64_t>(), s.at("sha256").get<std::string>()});
            }
        } catch (const nlohmann::json::exception& ex) {
            throw StoreError(std::string("manifest: ") + ex.what());
        } catch (const ConfigError& ex) {
            throw StoreError(std::string("manifest: ") + ex.what());
        }
        return m;
    }

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

inline fs::path manifest_path(const fs::path& root) { return root / "manifest.json"; }
inline fs::path frame_path(const fs::path& root, const std::string& hash) {
    return root / "frames" / (hash + ".ppm");
}

inline DatasetManifest load_manifest(const fs::path& root) {
    try {
        return DatasetManifest::from_json(nlohmann::json::parse(read_file(manifest_path(root))));
    } catch (const nlohmann::json::parse_error& ex) {
        throw StoreError(std::string("manifest: ") + ex.what());
    }
}

// ---- writer ---------------------------------------------------------------------------

struct ShardLocation {
    std::size_t shard = 0; // index into the manifest's shard list
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
};

// Each shard slot is owned by one thread at a time; different slots may be
// written concurrently. Counts are committed under a single lock and the
// manifest is written by close().
class DatasetWriter {
public:
    enum class Mode { Create, Append };

    DatasetWriter(fs::path root, const ActionSpaceSpec& spec, const RateConfig& rates,
                  std::size_t shard_slots = 1, Mode mode = Mode::Create)
        : root_(std::move(root)) {
        if (shard_slots == 0) throw ConfigError("shard count must be at least 1");
        spec.validate();
        const bool exists = fs::exists(manifest_path(root_));
        if (exists && mode == Mode::Create) {
            throw StoreError("store already exists at " + root_.string());
        }
        if (exists) {
            manifest_ = load_manifest(root_);
            if (!(manifest_.action_space == spec)) throw StoreError("action space differs from the store's");
        } else {
            manifest_.action_space = spec;
            manifest_.rates = rates;
        }
        std::error_code ec;
        fs::create_directories(root_ / "shards", ec);
        fs::create_directories(root_ / "frames", ec);
        if (ec) throw StoreError("cannot create store directories: " + ec.message());

        const std::size_t first = manifest_.shards.size();
        for (std::size_t i = 0; i < shard_slots; ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "shard-%04zu.bin", first + i);
            Slot slot;
            slot.info.file = std::string("shards/") + name;
            slot.path = root_ / slot.info.file;
            if (fs::exists(slot.path)) throw StoreError("shard exists but is not in manifest: " + slot.path.string());
            slots_.push_back(std::move(slot));
        }
    }

    DatasetWriter(const DatasetWriter&) = delete;
    DatasetWriter& operator=(const DatasetWriter&) = delete;

    ~DatasetWriter() {
        if (!closed_) {
            try {
                close();
            } catch (...) {
            }
        }
    }

    const ActionSpaceSpec& action_space() const { return manifest_.action_space; }
    std::size_t slots() const { return slots_.size(); }

    // Writes frames, then appends the record in one write. Returns the
    // record location. The episode's frame references are filled in.
    ShardLocation write_episode(Episode e, std::size_t slot_index = 0) {
        if (slot_index >= slots_.size()) throw ConfigError("shard slot out of range");
        validate_episode(e, manifest_.action_space);
        Slot& slot = slots_[slot_index];

        for (std::size_t i = 0; i < e.frames.size(); ++i) {
            const std::string bytes = encode_ppm(e.frames[i]);
            const std::string hash = sha256_hex(bytes);
            e.steps[i].frame = hash;
            const fs::path fp = frame_path(root_, hash);
            if (!fs::exists(fp)) write_file_atomic(fp, bytes, "." + std::to_string(slot_index));
        }
        e.frames.clear();

        const std::string record = frame_record(encode_episode(e));
        if (!slot.out.is_open()) {
            slot.out.open(slot.path, std::ios::binary | std::ios::app);
            if (!slot.out) throw StoreError("cannot open shard " + slot.path.string());
        }
        ShardLocation loc{slot_index, slot.info.bytes, record.size()};
        slot.out.write(record.data(), static_cast<std::streamsize>(record.size()));
        slot.out.flush();
        if (!slot.out) throw StoreError("write failed: " + slot.path.string());
        slot.info.bytes += record.size();
        ++slot.info.episodes;

        std::lock_guard lock(mutex_);
        manifest_.count(e);
        return loc;
    }

    // Computes shard checksums and commits the manifest. Empty slots leave no
    // shard behind.
    DatasetManifest close() {
        std::lock_guard lock(mutex_);
        if (closed_) return manifest_;
        for (auto& slot : slots_) {
            if (slot.out.is_open()) slot.out.close();
            if (slot.info.episodes == 0) continue;
            slot.info.sha256 = sha256_hex(read_file(slot.path));
            manifest_.shards.push_back(slot.info);
        }
        write_file_atomic(manifest_path(root_), manifest_.to_json().dump(2) + "\n");
        closed_ = true;
        return manifest_;
    }

private:
    struct Slot {
        ShardInfo info;
        fs::path path;
        std::ofstream out;
    };

    fs::path root_;
    DatasetManifest manifest_;
    std::vector<Slot> slots_;
    std::mutex mutex_;
    bool closed_ = false;
};

// Appends one episode to the store at `root` in a fresh shard, creating the
// store if needed.
inline ShardLocation write_episode(const Episode& e, const fs::path& root,
                                   const ActionSpaceSpec& spec = ActionSpaceSpec::defaults(),
                                   const RateConfig& rates = {}) {
    DatasetWriter w(root, spec, rates, 1, DatasetWriter::Mode::Append);
    auto loc = w.write_episode(e);
    loc.shard = w.close().shards.size() - 1;
    return loc;
}

// ---- reader ------------------------------------------------------------------------------

// Opens a store and verifies shard checksums, record checksums and manifest
// counts. The store is treated as immutable while open.
class DatasetReader {
public:
    explicit DatasetReader(fs::path root) : root_(std::move(root)) {
        if (!fs::exists(manifest_path(root_))) throw StoreError("no store at " + root_.string());
        manifest_ = load_manifest(root_);
        std::size_t total = 0;
        DatasetManifest recount;
        for (const auto& sh : manifest_.shards) {
            const std::string bytes = read_file(root_ / sh.file);
            if (bytes.size() != sh.bytes || sha256_hex(bytes) != sh.sha256) {
                throw StoreError(sh.file + ": shard checksum mismatch");
            }
            const auto records = split_records(bytes, sh.file);
            if (records.size() != sh.episodes) {
                throw StoreError(sh.file + ": manifest lists " + std::to_string(sh.episodes) +
                                 " episodes, shard holds " + std::to_string(records.size()));
            }
            for (auto payload : records) {
                episodes_.push_back(decode_episode(payload));
                recount.count(episodes_.back());
            }
            total += records.size();
        }
        if (total != manifest_.episode_count || recount.task_counts != manifest_.task_counts ||
            recount.source_counts != manifest_.source_counts || recount.split_counts != manifest_.split_counts ||
            recount.outcome_counts != manifest_.outcome_counts) {
            throw StoreError("manifest counts disagree with stored episodes");
        }
    }

    const fs::path& root() const { return root_; }
    const DatasetManifest& manifest() const { return manifest_; }
    const std::vector<Episode>& episodes() const { return episodes_; }
    std::size_t size() const { return episodes_.size(); }

    const Episode* find(const std::string& id) const {
        for (const auto& e : episodes_) {
            if (e.id == id) return &e;
        }
        return nullptr;
    }

    // Loads and verifies a frame by content hash.
    Observation frame(const std::string& hash) const {
        const std::string bytes = read_file(frame_path(root_, hash));
        if (sha256_hex(bytes) != hash) throw StoreError("frame " + hash + ": checksum mismatch");
        return decode_ppm(bytes);
    }

    std::vector<Observation> frames(const Episode& e) const {
        std::vector<Observation> out;
        out.reserve(e.steps.size());
        for (const auto& s : e.steps) out.push_back(frame(s.frame));
        return out;
    }

private:
    fs::path root_;
    DatasetManifest manifest_;
    std::vector<Episode> episodes_;
};

// ---- statistics ---------------------------------------------------------------------------

struct LengthStats {
    std::size_t episodes = 0;
    double mean = 0.0;
    double median = 0.0;
    std::size_t min = 0;
    std::size_t max = 0;
    std::vector<std::size_t> histogram; // bin i counts lengths in [i*w, (i+1)*w)
};

struct StatsReport {
    std::size_t episodes = 0;
    std::size_t histogram_bin_width = 2;
    std::map<Skill, LengthStats> per_task;
    std::map<std::pair<Skill, Source>, std::size_t> task_source_counts;
    std::map<Gait, double> gait_share;
    std::map<SpeedLevel, double> speed_share;
    std::map<Source, double> source_share;
    std::map<std::string, std::size_t> outcome_counts;

    bool empty() const { return episodes == 0; }

    std::string table() const {
        std::ostringstream os;
        char line[160];
        std::snprintf(line, sizeof line, "%-12s %6s %6s %8s %8s %5s %5s\n", "task", "sim", "real",
                      "mean_len", "median", "min", "max");
        os << line;
        for (const auto& [skill, ls] : per_task) {
            const auto sim = lookup(skill, Source::Sim);
            const auto real = lookup(skill, Source::Real);
            std::snprintf(line, sizeof line, "%-12s %6zu %6zu %8.2f %8.1f %5zu %5zu\n",
                          std::string(name(skill)).c_str(), sim, real, ls.mean, ls.median, ls.min, ls.max);
            os << line;
        }
        std::snprintf(line, sizeof line, "%-12s %6zu\n", "total", episodes);
        os << line;
        auto shares = [&](const char* label, const auto& m) {
            os << label << ":";
            for (const auto& [k, v] : m) {
                std::snprintf(line, sizeof line, " %s=%.3f", std::string(name(k)).c_str(), v);
                os << line;
            }
            os << "\n";
        };
        shares("speed", speed_share);
        shares("gait", gait_share);
        shares("source", source_share);
        os << "outcome:";
        for (const auto& [k, v] : outcome_counts) os << " " << k << "=" << v;
        os << "\n";
        return os.str();
    }

    // Mean trajectory length per task as bars with a median tick, and the
    // speed and gait shares as stacked strips.
    std::string svg() const {
        const int w = 640, h = 360, left = 110, top = 30, bar_h = 22, gap = 10;
        double max_len = 1.0;
        for (const auto& [s, ls] : per_task) max_len = std::max(max_len, static_cast<double>(ls.max));
        const double scale = (w - left - 40) / max_len;
        std::ostringstream os;
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                      "viewBox=\"0 0 %d %d\">\n",
                      w, h, w, h);
        os << buf << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        os << "<text x=\"10\" y=\"18\" font-family=\"monospace\" font-size=\"13\">trajectory length "
              "(steps) per task, n="
           << episodes << "</text>\n";
        int y = top;
        for (const auto& [skill, ls] : per_task) {
            std::snprintf(buf, sizeof buf,
                          "<text x=\"10\" y=\"%d\" font-family=\"monospace\" font-size=\"12\">%s</text>\n",
                          y + 15, std::string(name(skill)).c_str());
            os << buf;
            std::snprintf(buf, sizeof buf,
                          "<rect x=\"%d\" y=\"%d\" width=\"%.1f\" height=\"%d\" fill=\"#4a78c2\"/>\n", left,
                          y, ls.mean * scale, bar_h);
            os << buf;
            std::snprintf(buf, sizeof buf,
                          "<line x1=\"%.1f\" y1=\"%d\" x2=\"%.1f\" y2=\"%d\" stroke=\"black\" "
                          "stroke-width=\"2\"/>\n",
                          left + ls.median * scale, y - 2, left + ls.median * scale, y + bar_h + 2);
            os << buf;
            std::snprintf(buf, sizeof buf,
                          "<text x=\"%.1f\" y=\"%d\" font-family=\"monospace\" font-size=\"11\">%.1f</text>\n",
                          left + ls.mean * scale + 6, y + 15, ls.mean);
            os << buf;
            y += bar_h + gap;
        }
        auto strip = [&](const char* label, const auto& m, const std::array<const char*, 4>& colors) {
            std::snprintf(buf, sizeof buf,
                          "<text x=\"10\" y=\"%d\" font-family=\"monospace\" font-size=\"12\">%s</text>\n",
                          y + 15, label);
            os << buf;
            double x = left;
            std::size_t i = 0;
            for (const auto& [k, v] : m) {
                const double bw = v * (w - left - 40);
                std::snprintf(buf, sizeof buf,
                              "<rect x=\"%.1f\" y=\"%d\" width=\"%.1f\" height=\"%d\" fill=\"%s\"/>\n"
                              "<text x=\"%.1f\" y=\"%d\" font-family=\"monospace\" font-size=\"10\">%s</text>\n",
                              x, y, bw, bar_h, colors[i % colors.size()], x + 3, y + 15,
                              std::string(name(k)).c_str());
                os << buf;
                x += bw;
                ++i;
            }
            y += bar_h + gap;
        };
        strip("speed", speed_share, {"#8fbf6f", "#e0c060", "#d0705a", "#999999"});
        strip("gait", gait_share, {"#6fa8dc", "#b4a7d6", "#f6b26b", "#93c47d"});
        os << "</svg>\n";
        return os.str();
    }

private:
    std::size_t lookup(Skill s, Source src) const {
        auto it = task_source_counts.find({s, src});
        return it == task_source_counts.end() ? 0 : it->second;
    }
};

inline LengthStats length_stats(std::vector<std::size_t> lengths, std::size_t bin_width = 2) {
    LengthStats ls;
    ls.episodes = lengths.size();
    if (lengths.empty()) return ls;
    std::sort(lengths.begin(), lengths.end());
    double sum = 0.0;
    for (auto l : lengths) sum += static_cast<double>(l);
    ls.mean = sum / static_cast<double>(lengths.size());
    const std::size_t n = lengths.size();
    ls.median = n % 2 ? static_cast<double>(lengths[n / 2])
                      : 0.5 * static_cast<double>(lengths[n / 2 - 1] + lengths[n / 2]);
    ls.min = lengths.front();
    ls.max = lengths.back();
    ls.histogram.assign(ls.max / bin_width + 1, 0);
    for (auto l : lengths) ++ls.histogram[l / bin_width];
    return ls;
}

inline StatsReport compute_stats(const std::vector<Episode>& episodes) {
    StatsReport r;
    r.episodes = episodes.size();
    if (episodes.empty()) return r;
    std::map<Skill, std::vector<std::size_t>> lengths;
    const double n = static_cast<double>(episodes.size());
    for (const auto& e : episodes) {
        lengths[e.task().skill].push_back(e.length());
        ++r.task_source_counts[{e.task().skill, e.source}];
        r.gait_share[e.task().gait] += 1.0 / n;
        r.speed_share[e.task().speed] += 1.0 / n;
        r.source_share[e.source] += 1.0 / n;
        ++r.outcome_counts[e.unplannable ? "unplannable" : std::string(name(e.outcome.status))];
    }
    for (auto& [s, l] : lengths) r.per_task[s] = length_stats(std::move(l), r.histogram_bin_width);
    return r;
}

inline StatsReport compute_stats(const fs::path& root) {
    if (!fs::exists(manifest_path(root))) return {};
    return compute_stats(DatasetReader(root).episodes());
}

// ---- sim/real mixing ------------------------------------------------------------------------

enum class MixMode { Exhaustive, WeightedStream };

struct MixPolicy {
    std::size_t sim_count = 0;
    std::size_t real_count = 0;
    MixMode mode = MixMode::Exhaustive;

    std::size_t total() const { return sim_count + real_count; }
    std::string label() const { return std::to_string(sim_count) + ":" + std::to_string(real_count); }
};

struct MixItem {
    Source source = Source::Sim;
    std::size_t index = 0; // into the source's episode list

    friend bool operator==(const MixItem&, const MixItem&) = default;
};

// One pass yields exactly sim_count + real_count items. Sources are
// interleaved by error diffusion, so every prefix stays within one item of
// the target ratio. Exhaustive draws without replacement; WeightedStream
// draws with replacement.
class MixStream {
public:
    MixStream(const MixPolicy& policy, std::size_t sim_available, std::size_t real_available,
              std::uint64_t seed)
        : policy_(policy), rng_(seed) {
        auto check = [&](std::size_t want, std::size_t have, const char* what) {
            if (want == 0) return;
            if (have == 0) throw StoreError(std::string(what) + " store is empty");
            if (policy.mode == MixMode::Exhaustive && want > have) {
                throw StoreError(std::string(what) + " target " + std::to_string(want) + " exceeds " +
                                 std::to_string(have) + " available episodes");
            }
        };
        check(policy.sim_count, sim_available, "sim");
        check(policy.real_count, real_available, "real");
        sim_ = draw(policy.sim_count, sim_available);
        real_ = draw(policy.real_count, real_available);
    }

    std::optional<MixItem> next() {
        if (emitted_sim_ + emitted_real_ == policy_.total()) return std::nullopt;
        const double total = static_cast<double>(policy_.total());
        const double k = static_cast<double>(emitted_sim_ + emitted_real_ + 1);
        // Emit sim while it lags its share of the next prefix.
        const bool take_sim = emitted_sim_ < policy_.sim_count &&
                              (emitted_real_ == policy_.real_count ||
                               static_cast<double>(emitted_sim_) < k * static_cast<double>(policy_.sim_count) / total - 1e-12);
        if (take_sim) return MixItem{Source::Sim, sim_[emitted_sim_++]};
        return MixItem{Source::Real, real_[emitted_real_++]};
    }

    std::vector<MixItem> collect() {
        std::vector<MixItem> out;
        while (auto it = next()) out.push_back(*it);
        return out;
    }

private:
    std::vector<std::size_t> draw(std::size_t want, std::size_t have) {
        std::vector<std::size_t> out;
        if (want == 0) return out;
        if (policy_.mode == MixMode::Exhaustive) {
            std::vector<std::size_t> idx(have);
            for (std::size_t i = 0; i < have; ++i) idx[i] = i;
            rng_.shuffle(idx.begin(), idx.end());
            idx.resize(want);
            return idx;
        }
        for (std::size_t i = 0; i < want; ++i) out.push_back(rng_.below(have));
        return out;
    }

    MixPolicy policy_;
    Rng rng_;
    std::vector<std::size_t> sim_, real_;
    std::size_t emitted_sim_ = 0, emitted_real_ = 0;
};

inline MixStream mix_stream(const MixPolicy& policy, const std::vector<Episode>& sim,
                            const std::vector<Episode>& real, std::uint64_t seed) {
    return MixStream(policy, sim.size(), real.size(), seed);
}

// Materializes one pass as episodes.
inline std::vector<Episode> mix_episodes(const MixPolicy& policy, const std::vector<Episode>& sim,
                                         const std::vector<Episode>& real, std::uint64_t seed) {
    std::vector<Episode> out;
    auto stream = mix_stream(policy, sim, real, seed);
    while (auto it = stream.next()) out.push_back(it->source == Source::Sim ? sim[it->index] : real[it->index]);
    return out;
}

// Desk-scale co-training regimes: 0:30, 256:30, 2560:30.
inline std::vector<MixPolicy> desk_regimes() {
    return {{0, 30, MixMode::Exhaustive}, {256, 30, MixMode::Exhaustive}, {2560, 30, MixMode::Exhaustive}};
}

// ---- real-data import -----------------------------------------------------------------------

inline constexpr std::string_view kCommandsHeader =
    "step,v_x,v_y,omega_z,theta_1,theta_2,theta_3,f,h_z,phi,s_y,h_z_f,t";

struct ImportSkip {
    std::string episode;
    std::string reason;
};

struct ImportResult {
    std::vector<Episode> episodes;
    std::vector<ImportSkip> skipped;
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_number(const std::string& s, const std::string& where) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw StoreError(where + ": not a number '" + s + "'");
    }
    if (used != s.size()) throw StoreError(where + ": not a number '" + s + "'");
    if (!std::isfinite(v)) throw StoreError(where + ": non-finite value '" + s + "'");
    return v;
}

inline std::string frame_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu.ppm", i);
    return buf;
}

inline Episode import_one(const fs::path& dir, const ActionSpaceSpec& spec, const RateConfig& rates) {
    const std::string id = dir.filename().string();
    std::string text = read_file(dir / "instruction.txt");
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();

    Episode e;
    e.id = id;
    e.source = Source::Real;
    TaskSpec task;
    try {
        task = parse_instruction(text);
    } catch (const ParseError& ex) {
        throw StoreError(std::string("instruction.txt: ") + ex.what());
    }
    if (task.split == Split::SeenSim) task.split = Split::SeenReal;
    e.instruction = {text, task, "imported"};

    std::ifstream csv(dir / "commands.csv");
    if (!csv) throw StoreError("commands.csv: missing");
    std::string line;
    if (!std::getline(csv, line) || split_csv(line) != split_csv(std::string(kCommandsHeader))) {
        throw StoreError("commands.csv: bad header");
    }
    std::vector<ActionCommand> commands;
    while (std::getline(csv, line)) {
        if (line.empty() || line == "\r") continue;
        const auto row = commands.size();
        const std::string where = "commands.csv row " + std::to_string(row);
        const auto f = split_csv(line);
        if (f.size() != kActionDims + 1) throw StoreError(where + ": expected 13 fields");
        if (parse_number(f[0], where + " step") != static_cast<double>(row)) {
            throw StoreError(where + ": step index out of order");
        }
        std::array<double, kContinuousDims> v{};
        for (std::size_t d = 0; d < kContinuousDims; ++d) {
            v[d] = parse_number(f[d + 1], where + " " + std::string(kDimNames[d]));
        }
        const double t = parse_number(f[kActionDims], where + " t");
        if (t != 0.0 && t != 1.0) throw StoreError(where + ": t must be 0 or 1");
        commands.push_back(ActionCommand::from_continuous(v, t == 1.0));
    }
    if (commands.empty()) throw StoreError("commands.csv: no rows");

    std::optional<nlohmann::json> meta;
    if (fs::exists(dir / "meta.json")) {
        try {
            meta = nlohmann::json::parse(read_file(dir / "meta.json"));
        } catch (const nlohmann::json::exception& ex) {
            throw StoreError(std::string("meta.json: ") + ex.what());
        }
    }
    const bool declared_done = commands.back().terminate;
    for (std::size_t i = 0; i + 1 < commands.size(); ++i) {
        if (commands[i].terminate) throw StoreError("commands.csv row " + std::to_string(i) + ": t before the last row");
    }
    e.outcome.status = declared_done ? Status::Success : Status::Timeout;
    if (meta) {
        try {
            e.seed = meta->value("seed", std::uint64_t{0});
            if (meta->contains("outcome")) {
                e.outcome.status = require_enum<Status>(meta->at("outcome").get<std::string>(), kStatusNames, "outcome");
            }
            if (meta->contains("scene")) e.scene = scene_from_json(meta->at("scene"));
        } catch (const std::exception& ex) {
            throw StoreError(std::string("meta.json: ") + ex.what());
        }
    }

    // Poses are dead-reckoned from the commands; real logs carry no pose.
    WorldState dr;
    dr.robot = e.scene.start;
    SimConfig free_space;
    free_space.arena_min_x = free_space.arena_min_y = -1e9;
    free_space.arena_max_x = free_space.arena_max_y = 1e9;
    for (std::size_t i = 0; i < commands.size(); ++i) {
        const fs::path fp = dir / "frames" / frame_name(i);
        if (!fs::exists(fp)) throw StoreError("frames/" + frame_name(i) + ": missing");
        EpisodeStep st;
        st.command = clamp_to_space(commands[i], spec);
        st.tokens = tokenize(st.command, spec);
        st.pose = dr.robot;
        e.steps.push_back(st);
        e.frames.push_back(read_ppm(fp));
        dr = apply_command(dr, st.command, rates, free_space);
        dr.step_count = 0;
    }
    e.final_pose = dr.robot;
    if (e.succeeded() && !declared_done) throw StoreError("meta.json: success without a final t=1 row");
    return e;
}

} // namespace detail

// Reads every episode folder under `dir` (sorted by name). Malformed
// episodes are skipped with a reason; the rest are returned.
inline ImportResult load_import_dir(const fs::path& dir, const ActionSpaceSpec& spec,
                                    const RateConfig& rates = {}) {
    if (!fs::is_directory(dir)) throw StoreError("import directory not found: " + dir.string());
    std::vector<fs::path> folders;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory()) folders.push_back(entry.path());
    }
    std::sort(folders.begin(), folders.end());
    ImportResult r;
    for (const auto& f : folders) {
        try {
            r.episodes.push_back(detail::import_one(f, spec, rates));
        } catch (const Error& ex) {
            r.skipped.push_back({f.filename().string(), ex.what()});
        }
    }
    return r;
}

// Imports into the store at `store` (created if absent). Returns the number
// of imported episodes; `log` receives one line per skipped episode.
inline std::size_t import_real(const fs::path& dir, const fs::path& store, const ActionSpaceSpec& spec,
                               const RateConfig& rates = {},
                               const std::function<void(const ImportSkip&)>& log = {}) {
    auto r = load_import_dir(dir, spec, rates);
    for (const auto& s : r.skipped) {
        if (log) log(s);
    }
    if (r.episodes.empty()) return 0;
    DatasetWriter w(store, spec, rates, 1, DatasetWriter::Mode::Append);
    for (auto& e : r.episodes) w.write_episode(std::move(e));
    w.close();
    return r.episodes.size();
}

// Writes one episode in the import layout. Commands are written with full
// round-trip precision.
inline void export_import_layout(const Episode& e, const std::vector<Observation>& frames,
                                 const fs::path& dir) {
    if (frames.size() != e.steps.size()) throw StoreError("export needs one frame per step");
    const fs::path d = dir / e.id;
    std::error_code ec;
    fs::create_directories(d / "frames", ec);
    if (ec) throw StoreError("cannot create " + d.string() + ": " + ec.message());
    write_file_atomic(d / "instruction.txt", e.instruction.text + "\n");
    std::ostringstream csv;
    csv << kCommandsHeader << "\n";
    char num[40];
    for (std::size_t i = 0; i < e.steps.size(); ++i) {
        csv << i;
        for (double v : e.steps[i].command.continuous()) {
            std::snprintf(num, sizeof num, "%.17g", v);
            csv << "," << num;
        }
        csv << "," << (e.steps[i].command.terminate ? 1 : 0) << "\n";
        write_file_atomic(d / "frames" / detail::frame_name(i), encode_ppm(frames[i]));
    }
    write_file_atomic(d / "commands.csv", csv.str());
    nlohmann::json meta = {{"seed", e.seed}, {"outcome", name(e.outcome.status)}, {"scene", to_json(e.scene)}};
    write_file_atomic(d / "meta.json", meta.dump(2) + "\n");
}

} // namespace quard
