#include <doctest.h>

#include <fstream>
#include <map>
#include <set>

#include "support.hpp"
#include "trajlab/data/dataset.hpp"
#include "trajlab/data/ppm.hpp"
#include "trajlab/data/records.hpp"
#include "trajlab/error.hpp"
#include "trajlab/rng.hpp"

using namespace trajlab;
using namespace trajlab::data;
namespace fs = std::filesystem;
using test::TempDir;

namespace {

std::map<std::string, std::vector<std::uint8_t>> tree(const fs::path& root) {
  std::map<std::string, std::vector<std::uint8_t>> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file_bytes(e.path());
  return out;
}

std::vector<FrameRecord> straight_records(int n, double speed) {
  std::vector<FrameRecord> rs;
  for (int k = 0; k < n; ++k) {
    FrameRecord r;
    r.frame = k;
    r.time_s = 0.1 * k;
    r.image = frame_image_name(k);
    r.odom = {speed * 0.1 * k, 0.0, 0.0, speed};
    rs.push_back(r);
  }
  return rs;
}

GenerateOptions small(const fs::path& out, int level = 1, std::uint64_t seed = 7) {
  GenerateOptions o;
  o.level = level;
  o.seed = seed;
  o.n_episodes = 5;
  o.frames_per_episode = 30;
  o.out_dir = out;
  return o;
}

}  // namespace

TEST_CASE("ppm encoding") {
  render::Image img(2, 1);
  img.set(0, 0, {255, 0, 0});
  img.set(1, 0, {0, 255, 0});
  const auto bytes = encode_ppm(img);
  const std::string header = "P6\n2 1\n255\n";
  REQUIRE(bytes.size() == header.size() + 6);
  CHECK(std::string(bytes.begin(), bytes.begin() + static_cast<long>(header.size())) == header);
  CHECK(std::vector<std::uint8_t>(bytes.end() - 6, bytes.end()) ==
        std::vector<std::uint8_t>{0xFF, 0, 0, 0, 0xFF, 0});
  CHECK(decode_ppm(bytes) == img);

  Rng rng(4);
  render::Image big(37, 23);
  for (auto& p : big.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  CHECK(decode_ppm(encode_ppm(big)) == big);

  TempDir dir("ppm");
  write_image(dir / "a.ppm", big);
  CHECK(read_image(dir / "a.ppm") == big);
  CHECK_ERROR_KIND(read_image(dir / "missing.ppm"), ErrorKind::Io);
}

TEST_CASE("ppm corruption is a format error") {
  const std::string h = "P6\n2 2\n255\n";
  std::vector<std::uint8_t> short_payload(h.begin(), h.end());
  short_payload.resize(short_payload.size() + 9, 7);
  CHECK_ERROR_KIND(decode_ppm(short_payload), ErrorKind::Format);

  for (const std::string bad : {"P5\n2 2\n255\n", "P6\n2\n", "P6\n0 2\n255\n", "P6\n2 2\n65535\n",
                                "P6 2 2 255", "", "P6\nx 2\n255\n"}) {
    std::vector<std::uint8_t> b(bad.begin(), bad.end());
    b.resize(b.size() + 12, 1);
    CHECK_ERROR_KIND(decode_ppm(b), ErrorKind::Format);
  }
  // every truncation of a valid file fails cleanly
  render::Image img(3, 2);
  const auto good = encode_ppm(img);
  for (std::size_t n = 0; n < good.size(); ++n)
    CHECK_ERROR_KIND(decode_ppm(std::vector<std::uint8_t>(good.begin(), good.begin() + static_cast<long>(n))),
                     ErrorKind::Format);
  auto extra = good;
  extra.push_back(0);
  CHECK_ERROR_KIND(decode_ppm(extra), ErrorKind::Format);
}

TEST_CASE("records round trip exactly") {
  Rng rng(8);
  std::vector<FrameRecord> rs;
  for (int k = 0; k < 50; ++k) {
    FrameRecord r;
    r.frame = k;
    r.time_s = 0.1 * k;
    r.image = frame_image_name(k);
    r.odom = {rng.uniform(-500, 500), rng.uniform(-500, 500), rng.uniform(-180, 180), rng.uniform(0, 8.3334)};
    r.imu = {rng.uniform(-3, 2), rng.uniform(-5, 5), rng.uniform(-1, 1)};
    rs.push_back(r);
  }
  CHECK(parse_records(format_records(rs)) == rs);
  TempDir dir("rec");
  write_records(dir / "r.jsonl", rs);
  const auto back = read_records(dir / "r.jsonl");
  REQUIRE(back.size() == rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) {
    CHECK(std::abs(back[i].odom.x - rs[i].odom.x) <= 1e-9);
    CHECK(back[i] == rs[i]);
  }
}

TEST_CASE("record parse errors carry the line number") {
  const auto rs = straight_records(3, 1.0);
  std::string text = format_records(rs);
  SUBCASE("non-monotonic frames") {
    auto swapped = rs;
    std::swap(swapped[1].frame, swapped[2].frame);
    try {
      parse_records(format_records(swapped));
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Format);
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
  SUBCASE("garbage line") {
    text += "{not json\n";
    try {
      parse_records(text);
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Format);
      CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }
  }
  SUBCASE("missing and unknown keys") {
    CHECK_ERROR_KIND(parse_records("{\"frame\":0}\n"), ErrorKind::Format);
    std::string extra = format_record(rs[0]);
    extra.insert(1, "\"bogus\":1,");
    CHECK_ERROR_KIND(parse_records(extra + "\n"), ErrorKind::Format);
  }
  SUBCASE("every truncation fails or yields a prefix") {
    for (std::size_t n = 0; n < text.size(); ++n) {
      try {
        const auto got = parse_records(text.substr(0, n));
        CHECK(got.size() <= rs.size());
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == rs[i]);
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Format);
      }
    }
  }
}

TEST_CASE("manifest json round trip and strictness") {
  DatasetManifest m;
  m.level = 2;
  m.seed = 99;
  m.episodes = {{0, 100, Split::Train}, {1, 100, Split::Test}, {2, 100, Split::Val}};
  m.total_frames = 300;
  const auto back = manifest_from_json(manifest_to_json(m));
  CHECK(back.level == 2);
  CHECK(back.seed == 99);
  CHECK(back.episodes == m.episodes);
  CHECK(back.total_frames == 300);
  CHECK_ERROR_KIND(manifest_from_json("{}"), ErrorKind::Format);
  CHECK_ERROR_KIND(manifest_from_json("[1,2"), ErrorKind::Format);
}

TEST_CASE("split_dataset") {
  auto make = [](int n) {
    DatasetManifest m;
    for (int i = 0; i < n; ++i) m.episodes.push_back({i, 100, Split::Train});
    return m;
  };
  for (auto [n, tr, va, te] : {std::tuple{10, 6, 2, 2}, std::tuple{50, 30, 10, 10}}) {
    const auto m = split_dataset(make(n), {0.6, 0.2, 0.2}, 3);
    CHECK(m.count(Split::Train) == static_cast<std::size_t>(tr));
    CHECK(m.count(Split::Val) == static_cast<std::size_t>(va));
    CHECK(m.count(Split::Test) == static_cast<std::size_t>(te));
    CHECK(split_dataset(make(n), {0.6, 0.2, 0.2}, 3).episodes == m.episodes);
  }
  // different seeds move episodes, counts stay
  CHECK(split_dataset(make(10), {0.6, 0.2, 0.2}, 1).episodes !=
        split_dataset(make(10), {0.6, 0.2, 0.2}, 2).episodes);
  CHECK_ERROR_KIND(split_dataset(make(2), {0.6, 0.2, 0.2}, 0), ErrorKind::Config);
  CHECK_ERROR_KIND(split_dataset(make(10), {0.6, 0.2, 0.3}, 0), ErrorKind::Config);
  CHECK_ERROR_KIND(split_dataset(make(10), {-0.1, 0.6, 0.5}, 0), ErrorKind::Config);
  // every non-zero bucket gets an episode
  const auto m3 = split_dataset(make(3), {0.9, 0.05, 0.05}, 0);
  CHECK(m3.count(Split::Val) == 1);
  CHECK(m3.count(Split::Test) == 1);
}

TEST_CASE("build_sequences") {
  const auto rs = straight_records(100, 8.3334);
  const auto seqs = build_sequences(rs, 5, 5, 1, 3);
  REQUIRE(seqs.size() == 91);
  CHECK(seqs.front().anchor().frame == 4);
  CHECK(seqs.back().anchor().frame == 94);
  for (const auto& s : seqs) {
    CHECK(s.label.size() == 10);
    CHECK(s.episode_id == 3);
    for (std::size_t k = 1; k < s.inputs.size(); ++k)
      CHECK(s.inputs[k].frame == s.inputs[k - 1].frame + 1);
    for (double v : s.label) CHECK(std::abs(v / SampleSequence::kNormScale) <= 1.0);
  }
  const double expect[10] = {0, 0.8333, 0, 1.6667, 0, 2.5, 0, 3.3333, 0, 4.1667};
  for (int i = 0; i < 10; ++i) CHECK(seqs[0].label[i] == doctest::Approx(expect[i]).epsilon(1e-4));

  const auto still = build_sequences(straight_records(20, 0.0));
  for (double v : still[0].label) CHECK(v == 0.0);
  CHECK(build_sequences(straight_records(9, 1.0)).empty());
  CHECK(build_sequences(straight_records(10, 1.0)).size() == 1);
  CHECK(build_sequences(rs, 5, 5, 3).size() == 31);
}

TEST_CASE("generate_dataset layout, determinism and label consistency") {
  TempDir a("gen_a"), b("gen_b");
  const auto m = generate_dataset(small(a.path()));
  generate_dataset(small(b.path()));
  CHECK(tree(a.path()) == tree(b.path()));
  CHECK(m.total_frames == 150);
  CHECK(m.count(Split::Train) == 3);
  CHECK(m.count(Split::Val) == 1);
  CHECK(m.count(Split::Test) == 1);

  TempDir c("gen_c");
  auto opt = small(c.path());
  opt.jobs = 3;
  generate_dataset(opt);
  CHECK(tree(a.path()) == tree(c.path()));

  const auto loaded = load_manifest(a.path());
  CHECK(loaded.episodes == m.episodes);
  std::set<int> seen;
  for (const auto& e : loaded.episodes) {
    CHECK(seen.insert(e.id).second);
    const auto ep = load_episode(a.path(), loaded, e);
    CHECK(static_cast<std::int64_t>(ep.records.size()) == e.n_frames);
    for (const auto& img : ep.images) {
      CHECK(img.width == 80);
      CHECK(img.height == 60);
    }
    // labels map back onto the recorded odometry
    for (const auto& s : build_sequences(ep.records, 5, 5, 1, e.id)) {
      const auto world = label_to_world(s.anchor().odom, s.label);
      for (std::size_t k = 0; k < s.future.size(); ++k) {
        CHECK(std::abs(world[2 * k] - s.future[k].odom.x) < 1e-6);
        CHECK(std::abs(world[2 * k + 1] - s.future[k].odom.y) < 1e-6);
      }
    }
  }
  std::ifstream in(episode_dir(a.path(), 0) / "records.jsonl");
  int lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  CHECK(lines == 30);

  TempDir d("gen_d");
  generate_dataset(small(d.path(), 1, 8));
  CHECK(tree(a.path()) != tree(d.path()));
}

TEST_CASE("generate_dataset argument and io errors") {
  TempDir dir("gen_err");
  auto o = small(dir / "x");
  o.level = 3;
  CHECK_ERROR_KIND(generate_dataset(o), ErrorKind::Parameter);
  o = small(dir / "x");
  o.n_episodes = 0;
  CHECK_ERROR_KIND(generate_dataset(o), ErrorKind::Parameter);
  o = small(dir / "x");
  o.frames_per_episode = 5;
  CHECK_ERROR_KIND(generate_dataset(o), ErrorKind::Parameter);

  // a regular file where the output directory should be
  { std::ofstream(dir / "blocker") << "x"; }
  CHECK_ERROR_KIND(generate_dataset(small(dir / "blocker" / "out")), ErrorKind::Io);
  CHECK_FALSE(fs::exists(dir / "blocker" / "out" / "manifest.json"));
}

TEST_CASE("loading a damaged dataset") {
  TempDir dir("damaged");
  const auto m = generate_dataset(small(dir.path()));
  CHECK_ERROR_KIND(load_manifest(dir / "nope"), ErrorKind::Io);
  SUBCASE("missing image") {
    fs::remove(episode_dir(dir.path(), 1) / frame_image_name(3));
    CHECK_ERROR_KIND(load_episode(dir.path(), m, m.episodes[1]), ErrorKind::Io);
  }
  SUBCASE("short records file") {
    const auto p = episode_dir(dir.path(), 2) / "records.jsonl";
    auto rs = read_records(p);
    rs.pop_back();
    write_records(p, rs);
    CHECK_ERROR_KIND(load_episode(dir.path(), m, m.episodes[2]), ErrorKind::Format);
  }
  SUBCASE("wrong image resolution") {
    write_image(episode_dir(dir.path(), 0) / frame_image_name(0), render::Image(8, 6));
    CHECK_ERROR_KIND(load_episode(dir.path(), m, m.episodes[0]), ErrorKind::Format);
  }
}
