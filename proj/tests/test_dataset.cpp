// Copyright (c) 2026 The quard authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <unistd.h>

#include <fstream>
#include <set>
#include <thread>

#include "quard/dataset.hpp"
#include "quard/expert.hpp"

using namespace quard;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("quard-test-" + name + "-" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

Observation tiny_frame(std::uint8_t seed) {
    Observation o;
    o.width = 4;
    o.height = 3;
    o.intrinsics.width = 4;
    o.intrinsics.height = 3;
    o.rgb.resize(36);
    for (std::size_t i = 0; i < o.rgb.size(); ++i) o.rgb[i] = static_cast<std::uint8_t>(seed * 31 + i);
    return o;
}

// A small valid episode with synthetic frames; cheap enough for stress runs.
Episode synthetic(std::size_t k, std::size_t steps = 3) {
    const auto spec = ActionSpaceSpec::defaults();
    Episode e;
    TaskSpec t;
    t.skill = kAllSkills[k % kAllSkills.size()];
    t.object = t.skill == Skill::Distinguish ? ObjectRef{"letterbox", Color::Red, 'A'}
               : t.skill == Skill::GoThrough ? ObjectRef{"rectangle", Color::Blue, 0}
               : t.skill == Skill::Unload    ? ObjectRef{"traybox", Color::Green, 0}
                                             : ObjectRef{"cube", Color::Yellow, 0};
    t.speed = kAllSpeeds[k % 3];
    e.instruction = render_instruction(t);
    e.id = "synthetic-" + std::to_string(k);
    e.seed = k;
    e.source = k % 10 == 0 ? Source::Real : Source::Sim;
    e.outcome.status = Status::Success;
    e.outcome.distance_to_target = 0.5 + k;
    for (std::size_t i = 0; i < steps; ++i) {
        EpisodeStep st;
        st.command.v_x = 0.1 * static_cast<double>(i);
        st.command.f = 2.0;
        st.command.h_z = 0.25;
        st.command.h_z_f = 0.08;
        st.command.terminate = i + 1 == steps;
        st.tokens = tokenize(st.command, spec);
        st.pose = {0.05 * static_cast<double>(i), 0.0, 0.0};
        e.steps.push_back(st);
        e.frames.push_back(tiny_frame(static_cast<std::uint8_t>(k * 7 + i)));
    }
    e.final_pose = {1.0, 2.0, 0.5};
    return e;
}

// Episode as it reads back from a store: frames dropped, frame hashes set.
Episode stored_form(Episode e) {
    for (std::size_t i = 0; i < e.frames.size(); ++i) e.steps[i].frame = sha256_hex(encode_ppm(e.frames[i]));
    e.frames.clear();
    return e;
}

void write_text(const fs::path& p, const std::string& s) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << s;
}

} // namespace

TEST(Hashing, KnownSha256Vectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(RecordCodec, EpisodeRoundTrip) {
    const auto e = stored_form(generate_episode(
        TaskSpec{Skill::GoAvoid, {"vase", Color::Blue, 0}, SpeedLevel::Fast, Gait::Bound, Split::SeenSim}, 5));
    EXPECT_EQ(decode_episode(encode_episode(e)), e);
}

TEST(RecordCodec, LayoutStartsWithVersionAndId) {
    const auto e = stored_form(synthetic(1));
    const auto bytes = encode_episode(e);
    EXPECT_EQ(static_cast<unsigned char>(bytes[0]), 1);
    EXPECT_EQ(static_cast<unsigned char>(bytes[1]), 0);
    EXPECT_EQ(static_cast<unsigned char>(bytes[2]), e.id.size());
    EXPECT_EQ(bytes.substr(6, e.id.size()), e.id);
}

TEST(RecordFraming, DetectsCorruption) {
    const std::string payload = encode_episode(stored_form(synthetic(2)));
    const std::string rec = frame_record(payload);
    ASSERT_EQ(rec.size(), 4 + 8 + payload.size() + 32);
    EXPECT_EQ(rec.substr(0, 4), "QREC");
    const auto two = rec + rec;
    EXPECT_EQ(split_records(two, "t").size(), 2u);

    std::string flipped = rec;
    flipped[20] ^= 0x01;
    EXPECT_THROW(split_records(flipped, "t"), StoreError);
    EXPECT_THROW(split_records(rec.substr(0, rec.size() - 1), "t"), StoreError);
    std::string magic = rec;
    magic[0] = 'X';
    EXPECT_THROW(split_records(magic, "t"), StoreError);
    EXPECT_THROW(decode_episode(payload + "x"), StoreError);
}

TEST(Validation, NamesFieldPath) {
    const auto spec = ActionSpaceSpec::defaults();
    auto e = synthetic(3);
    e.steps[1].tokens[8] = 999;
    try {
        validate_episode(e, spec);
        FAIL();
    } catch (const StoreError& ex) {
        EXPECT_NE(std::string(ex.what()).find("episode[synthetic-3].steps[1].tokens[phi]"), std::string::npos)
            << ex.what();
    }
    e = synthetic(3);
    e.steps[0].tokens[11] = 1;
    EXPECT_THROW(validate_episode(e, spec), StoreError);
    e = synthetic(3);
    e.steps.back().tokens[11] = 0;
    EXPECT_THROW(validate_episode(e, spec), StoreError);
    e = synthetic(3);
    e.steps.clear();
    e.frames.clear();
    EXPECT_THROW(validate_episode(e, spec), StoreError);
}

TEST(Store, WriteReadRoundTrip) {
    const auto root = fresh_dir("roundtrip");
    const auto spec = ActionSpaceSpec::defaults();
    std::vector<Episode> eps;
    for (std::size_t k = 0; k < 20; ++k) eps.push_back(synthetic(k));
    {
        DatasetWriter w(root, spec, RateConfig{}, 2);
        for (std::size_t k = 0; k < eps.size(); ++k) w.write_episode(eps[k], k % 2);
    }
    DatasetReader r(root);
    ASSERT_EQ(r.size(), 20u);
    EXPECT_EQ(r.manifest().episode_count, 20u);
    EXPECT_EQ(r.manifest().shards.size(), 2u);
    EXPECT_EQ(r.manifest().source_counts.at("real"), 2u);
    for (const auto& e : eps) {
        const Episode* got = r.find(e.id);
        ASSERT_NE(got, nullptr);
        EXPECT_EQ(*got, stored_form(e));
        EXPECT_EQ(r.frames(*got), e.frames);
    }
    EXPECT_EQ(DatasetManifest::from_json(r.manifest().to_json()), r.manifest());
    fs::remove_all(root);
}

TEST(Store, ManifestSchemaKeys) {
    const auto root = fresh_dir("schema");
    write_episode(synthetic(0), root);
    const auto j = nlohmann::json::parse(read_file(manifest_path(root)));
    for (const char* key : {"format_version", "action_space", "rates", "episode_count", "counts", "shards"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
    EXPECT_EQ(j["shards"][0]["file"], "shards/shard-0000.bin");
    EXPECT_EQ(j["shards"][0]["sha256"], sha256_hex(read_file(root / "shards/shard-0000.bin")));
    EXPECT_EQ(j["counts"]["task"]["distinguish"], 1);
    fs::remove_all(root);
}

TEST(Store, AppendAddsShardsAndCreateRefusesExisting) {
    const auto root = fresh_dir("append");
    const auto spec = ActionSpaceSpec::defaults();
    write_episode(synthetic(0), root);
    write_episode(synthetic(1), root);
    EXPECT_THROW(DatasetWriter(root, spec, RateConfig{}), StoreError);
    auto other = spec;
    other.bin_count = 128;
    EXPECT_THROW(DatasetWriter(root, other, RateConfig{}, 1, DatasetWriter::Mode::Append), StoreError);
    DatasetReader r(root);
    EXPECT_EQ(r.size(), 2u);
    EXPECT_EQ(r.manifest().shards.size(), 2u);
    fs::remove_all(root);
}

TEST(Store, TamperingIsDetected) {
    const auto root = fresh_dir("tamper");
    write_episode(synthetic(4), root);
    const fs::path shard = root / "shards/shard-0000.bin";
    std::string bytes = read_file(shard);
    bytes[bytes.size() / 2] ^= 0x40;
    write_text(shard, bytes);
    EXPECT_THROW(DatasetReader{root}, StoreError);
    fs::remove_all(root);

    write_episode(synthetic(4), root);
    DatasetReader r(root);
    const auto hash = r.episodes()[0].steps[0].frame;
    std::string frame = read_file(frame_path(root, hash));
    frame.back() ^= 0x01;
    write_text(frame_path(root, hash), frame);
    EXPECT_THROW(r.frame(hash), StoreError);
    fs::remove_all(root);

    write_episode(synthetic(4), root);
    auto j = nlohmann::json::parse(read_file(manifest_path(root)));
    j["episode_count"] = 2;
    write_text(manifest_path(root), j.dump());
    EXPECT_THROW(DatasetReader{root}, StoreError);
    fs::remove_all(root);
}

TEST(Store, IdenticalInputsGiveIdenticalBytes) {
    const auto a = fresh_dir("det-a"), b = fresh_dir("det-b");
    for (const auto& root : {a, b}) {
        DatasetWriter w(root, ActionSpaceSpec::defaults(), RateConfig{}, 3);
        for (std::size_t k = 0; k < 12; ++k) w.write_episode(synthetic(k), k % 3);
    }
    for (const char* f : {"manifest.json", "shards/shard-0000.bin", "shards/shard-0001.bin", "shards/shard-0002.bin"}) {
        EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Store, ConcurrentWritersStress) {
    const auto root = fresh_dir("stress");
    const std::size_t writers = 8, total = 1000;
    {
        DatasetWriter w(root, ActionSpaceSpec::defaults(), RateConfig{}, writers);
        std::vector<std::thread> threads;
        for (std::size_t t = 0; t < writers; ++t) {
            threads.emplace_back([&, t] {
                for (std::size_t k = t; k < total; k += writers) w.write_episode(synthetic(k, 1 + k % 5), t);
            });
        }
        for (auto& th : threads) th.join();
    }
    DatasetReader r(root);
    ASSERT_EQ(r.size(), total);
    EXPECT_EQ(r.manifest().shards.size(), writers);
    std::set<std::string> ids;
    for (const auto& e : r.episodes()) ids.insert(e.id);
    EXPECT_EQ(ids.size(), total);
    for (std::size_t k = 0; k < total; k += 97) {
        const auto want = synthetic(k, 1 + k % 5);
        EXPECT_EQ(*r.find(want.id), stored_form(want));
    }
    std::size_t sum = 0;
    for (const auto& [task, n] : r.manifest().task_counts) sum += n;
    EXPECT_EQ(sum, total);
    for (const auto& entry : fs::directory_iterator(root / "frames")) {
        EXPECT_EQ(entry.path().extension(), ".ppm") << entry.path();
    }
    fs::remove_all(root);
}

TEST(Stats, LengthStatsMatchHandComputation) {
    const auto ls = length_stats({4, 8, 6, 2, 10}, 2);
    EXPECT_EQ(ls.episodes, 5u);
    EXPECT_DOUBLE_EQ(ls.mean, 6.0);
    EXPECT_DOUBLE_EQ(ls.median, 6.0);
    EXPECT_EQ(ls.min, 2u);
    EXPECT_EQ(ls.max, 10u);
    EXPECT_EQ(ls.histogram, (std::vector<std::size_t>{0, 1, 1, 1, 1, 1}));
    EXPECT_DOUBLE_EQ(length_stats({3, 1, 2, 4}).median, 2.5);
}

TEST(Stats, SharesAndCounts) {
    std::vector<Episode> eps;
    for (std::size_t k = 0; k < 60; ++k) eps.push_back(synthetic(k, 1 + k % 4));
    const auto r = compute_stats(eps);
    EXPECT_EQ(r.episodes, 60u);
    for (SpeedLevel s : kAllSpeeds) EXPECT_NEAR(r.speed_share.at(s), 1.0 / 3, 1e-12);
    EXPECT_NEAR(r.source_share.at(Source::Real), 0.1, 1e-12);
    EXPECT_EQ(r.per_task.size(), 6u);
    EXPECT_NE(r.table().find("total"), std::string::npos);
    EXPECT_NE(r.svg().find("<svg"), std::string::npos);
    EXPECT_TRUE(compute_stats(fresh_dir("nothing")).empty());
}

TEST(Mixing, RealizesTargetsExactly) {
    for (const auto& policy : desk_regimes()) {
        auto stream = MixStream(policy, 3000, 30, 11);
        const auto items = stream.collect();
        ASSERT_EQ(items.size(), policy.total());
        std::size_t sim = 0;
        std::set<std::size_t> sim_idx, real_idx;
        for (std::size_t i = 0; i < items.size(); ++i) {
            const auto& it = items[i];
            if (it.source == Source::Sim) {
                ++sim;
                sim_idx.insert(it.index);
            } else {
                real_idx.insert(it.index);
            }
            // Every prefix stays within one item of the target share.
            const double want = static_cast<double>(i + 1) * policy.sim_count / policy.total();
            EXPECT_LE(std::abs(static_cast<double>(sim) - want), 1.0 + 1e-9);
        }
        EXPECT_EQ(sim, policy.sim_count) << policy.label();
        EXPECT_EQ(sim_idx.size(), policy.sim_count);
        EXPECT_EQ(real_idx.size(), policy.real_count);
    }
}

TEST(Mixing, ExhaustiveRejectsShortSupplyWeightedResamples) {
    EXPECT_THROW(MixStream({256, 30, MixMode::Exhaustive}, 100, 30, 1), StoreError);
    EXPECT_THROW(MixStream({0, 30, MixMode::Exhaustive}, 0, 0, 1), StoreError);
    auto s = MixStream({256, 30, MixMode::WeightedStream}, 100, 30, 1);
    const auto items = s.collect();
    std::size_t sim = 0;
    for (const auto& it : items) {
        sim += it.source == Source::Sim;
        EXPECT_LT(it.index, it.source == Source::Sim ? 100u : 30u);
    }
    EXPECT_EQ(sim, 256u);
}

TEST(Mixing, DeterministicPerSeed) {
    EXPECT_EQ(MixStream({256, 30}, 500, 30, 9).collect(), MixStream({256, 30}, 500, 30, 9).collect());
    EXPECT_NE(MixStream({256, 30}, 500, 30, 9).collect(), MixStream({256, 30}, 500, 30, 10).collect());
}

TEST(Import, ExportThenImportRoundTrip) {
    const auto dir = fresh_dir("import-rt");
    const auto e = generate_teleop_episode(
        TaskSpec{Skill::GoTo, {"sofa", Color::Green, 0}, SpeedLevel::Slow, Gait::Trot, Split::SeenSim}, 21);
    export_import_layout(e, e.frames, dir);
    const auto r = load_import_dir(dir, ActionSpaceSpec::defaults());
    ASSERT_EQ(r.episodes.size(), 1u);
    EXPECT_TRUE(r.skipped.empty());
    const auto& got = r.episodes[0];
    EXPECT_EQ(got.id, e.id);
    EXPECT_EQ(got.instruction.text, e.instruction.text);
    EXPECT_EQ(got.task().split, Split::SeenReal);
    EXPECT_EQ(got.source, Source::Real);
    EXPECT_EQ(got.outcome.status, e.outcome.status);
    EXPECT_EQ(got.scene, e.scene);
    EXPECT_EQ(got.frames, e.frames);
    ASSERT_EQ(got.steps.size(), e.steps.size());
    for (std::size_t i = 0; i < e.steps.size(); ++i) {
        EXPECT_EQ(got.steps[i].command, e.steps[i].command);
        EXPECT_EQ(got.steps[i].tokens, e.steps[i].tokens);
    }
    fs::remove_all(dir);
}

TEST(Import, MalformedEpisodesAreSkippedWithReason) {
    const auto dir = fresh_dir("import-bad");
    const std::string header = std::string(kCommandsHeader) + "\n";
    const std::string row0 = "0,0.3,0,0,0.5,0,0,3,0.25,0,0.2,0.08,0\n";
    const std::string row1 = "1,0.3,0,0,0.5,0,0,3,0.25,0,0.2,0.08,1\n";
    auto make = [&](const std::string& name, const std::string& text, const std::string& csv, int frames) {
        write_text(dir / name / "instruction.txt", text + "\n");
        write_text(dir / name / "commands.csv", csv);
        fs::create_directories(dir / name / "frames");
        for (int i = 0; i < frames; ++i) write_ppm(dir / name / "frames" / detail::frame_name(i), tiny_frame(1));
    };
    const std::string ok_text = "go to the red cube slowly with trot gait";
    make("a_good", ok_text, header + row0 + row1, 2);
    make("b_early_t", ok_text, header + "0,0.3,0,0,0.5,0,0,3,0.25,0,0.2,0.08,1\n" + row1, 2);
    make("c_bad_header", ok_text, "step,v_x\n" + row0, 1);
    make("d_missing_frame", ok_text, header + row0 + row1, 1);
    make("e_nan", ok_text, header + "0,abc,0,0,0.5,0,0,3,0.25,0,0.2,0.08,1\n", 1);
    make("f_bad_text", "dance wildly", header + "0,0.3,0,0,0.5,0,0,3,0.25,0,0.2,0.08,1\n", 1);
    make("g_timeout", ok_text, header + row0, 1);

    const auto r = load_import_dir(dir, ActionSpaceSpec::defaults());
    ASSERT_EQ(r.episodes.size(), 2u);
    EXPECT_EQ(r.episodes[0].id, "a_good");
    EXPECT_EQ(r.episodes[0].outcome.status, Status::Success);
    EXPECT_EQ(r.episodes[1].id, "g_timeout");
    EXPECT_EQ(r.episodes[1].outcome.status, Status::Timeout);
    // Dead-reckoned pose: 0.3 m/s for one 0.5 s tick.
    EXPECT_NEAR(r.episodes[0].steps[1].pose.x, 0.15, 1e-12);
    ASSERT_EQ(r.skipped.size(), 5u);
    std::map<std::string, std::string> why;
    for (const auto& s : r.skipped) why[s.episode] = s.reason;
    EXPECT_NE(why["b_early_t"].find("t before the last row"), std::string::npos);
    EXPECT_NE(why["c_bad_header"].find("bad header"), std::string::npos);
    EXPECT_NE(why["d_missing_frame"].find("000001.ppm"), std::string::npos);
    EXPECT_NE(why["e_nan"].find("v_x"), std::string::npos);
    EXPECT_NE(why["f_bad_text"].find("instruction.txt"), std::string::npos);

    const auto store = fresh_dir("import-store");
    std::vector<std::string> logged;
    EXPECT_EQ(import_real(dir, store, ActionSpaceSpec::defaults(), {},
                          [&](const ImportSkip& s) { logged.push_back(s.episode); }),
              2u);
    EXPECT_EQ(logged.size(), 5u);
    DatasetReader reader(store);
    EXPECT_EQ(reader.manifest().source_counts.at("real"), 2u);
    fs::remove_all(dir);
    fs::remove_all(store);
}
