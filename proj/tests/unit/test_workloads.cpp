#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

#include "tierpt/workloads.hpp"

using namespace tierpt;

TEST_CASE("zeta partial sums") {
  CHECK(zeta(1, 0.99) == 1.0);
  CHECK(zeta(2, 0.99) == doctest::Approx(1.5034777750283594).epsilon(1e-12));
  CHECK(zeta(1000, 0.99) == doctest::Approx(7.728953217284729).epsilon(1e-12));
}

TEST_CASE("fnv1a64 fixed points") {
  CHECK(fnv1a64(0) == 0xa8c7f832281a39c5ull);
  CHECK(fnv1a64(0x0123456789abcdefull) == 0x37eb3f3347761c55ull);
  CHECK(fnv1a64(1) != fnv1a64(1ull << 8));  // bytes, not values
}

TEST_CASE("zipfian ranks are deterministic and heavily skewed") {
  ZipfianGenerator zipf(1000, 0.99);
  std::mt19937_64 rng(42);
  std::map<std::uint64_t, std::uint64_t> freq;
  const int kDraws = 200000;
  for (int i = 0; i < kDraws; ++i) freq[zipf.next(rng)]++;

  // Frozen expectation for the mass of the head of the distribution.
  double top1 = static_cast<double>(freq[0]) / kDraws;
  double top10 = 0;
  for (std::uint64_t r = 0; r < 10; ++r)
    top10 += static_cast<double>(freq[r]) / kDraws;
  CHECK(top1 == doctest::Approx(0.1294).epsilon(0.02));
  CHECK(top10 == doctest::Approx(0.3825).epsilon(0.02));

  ZipfianGenerator again(1000, 0.99);
  std::mt19937_64 a(7), b(7);
  for (int i = 0; i < 100; ++i) CHECK(zipf.next(a) == again.next(b));

  CHECK_THROWS_AS(ZipfianGenerator(0, 0.5), InvalidOperation);
  CHECK_THROWS_AS(ZipfianGenerator(10, 1.0), InvalidOperation);
  CHECK_THROWS_AS(ZipfianGenerator(10, 0.0), InvalidOperation);
}

TEST_CASE("access stream populates sequentially before sampling") {
  WorkloadSpec spec;
  spec.footprint_bytes = 8 * kPageSize;
  spec.base_va = 0x10000;
  spec.access.op_count = 20;
  spec.access.read_ratio = 0.5;
  AccessStream s(spec, PageSizeMode::Base4K, 1);
  CHECK(s.pages() == 8);

  for (std::uint64_t i = 0; i < 8; ++i) {
    auto op = s.next();
    REQUIRE(op);
    CHECK(op->va == 0x10000 + i * kPageSize);
    CHECK(op->populate);
    CHECK(op->is_write);
  }
  CHECK(s.populate_done());

  int writes = 0;
  for (int i = 0; i < 20; ++i) {
    auto op = s.next();
    REQUIRE(op);
    CHECK(!op->populate);
    CHECK(op->va >= 0x10000);
    CHECK(op->va < 0x10000 + 8 * kPageSize);
    if (op->is_write) writes++;
  }
  CHECK(!s.next());
  CHECK(s.emitted() == 28);
  CHECK(writes > 0);
  CHECK(writes < 20);
}

TEST_CASE("the same seed replays the same stream") {
  WorkloadSpec spec;
  spec.footprint_bytes = 64 * kPageSize;
  spec.populate = false;
  spec.access.op_count = 500;
  AccessStream a(spec, PageSizeMode::Base4K, 99);
  AccessStream b(spec, PageSizeMode::Base4K, 99);
  AccessStream c(spec, PageSizeMode::Base4K, 100);
  bool diverged = false;
  for (int i = 0; i < 500; ++i) {
    auto oa = a.next();
    auto ob = b.next();
    auto oc = c.next();
    REQUIRE(oa);
    CHECK(oa->va == ob->va);
    CHECK(oa->is_write == ob->is_write);
    if (oa->va != oc->va) diverged = true;
  }
  CHECK(diverged);
}

TEST_CASE("scrambling spreads hot ranks; rank order keeps them in front") {
  WorkloadSpec spec;
  spec.footprint_bytes = 1024 * kPageSize;
  spec.populate = false;
  spec.access.op_count = 20000;
  spec.access.scramble = false;
  AccessStream plain(spec, PageSizeMode::Base4K, 7);
  std::map<std::uint64_t, int> freq;
  for (int i = 0; i < 20000; ++i) {
    auto op = plain.next();
    REQUIRE(op);
    freq[(op->va - spec.base_va) >> kPageShift]++;
  }
  // Unscrambled, rank 0 is page 0.
  std::uint64_t hottest =
      std::max_element(freq.begin(), freq.end(), [](auto& a, auto& b) {
        return a.second < b.second;
      })->first;
  CHECK(hottest == 0);

  spec.access.scramble = true;
  AccessStream mixed(spec, PageSizeMode::Base4K, 7);
  std::map<std::uint64_t, int> freq2;
  for (int i = 0; i < 20000; ++i)
    freq2[(mixed.next()->va - spec.base_va) >> kPageShift]++;
  std::uint64_t hottest2 =
      std::max_element(freq2.begin(), freq2.end(), [](auto& a, auto& b) {
        return a.second < b.second;
      })->first;
  CHECK(hottest2 == fnv1a64(0) % 1024);
}

TEST_CASE("uniform sampling touches the whole footprint evenly") {
  WorkloadSpec spec;
  spec.footprint_bytes = 16 * kPageSize;
  spec.populate = false;
  spec.access.op_count = 16000;
  spec.access.dist = Distribution::Uniform;
  AccessStream s(spec, PageSizeMode::Base4K, 3);
  std::map<std::uint64_t, int> freq;
  for (int i = 0; i < 16000; ++i)
    freq[(s.next()->va - spec.base_va) >> kPageShift]++;
  REQUIRE(freq.size() == 16);
  for (auto& [page, count] : freq) CHECK(count > 600);
}

TEST_CASE("huge page streams step in 2 MiB strides") {
  WorkloadSpec spec;
  spec.footprint_bytes = 4 * kHugePageSize + 1;  // rounds up to 5 pages
  spec.access.op_count = 50;
  AccessStream s(spec, PageSizeMode::Thp2M, 5);
  CHECK(s.pages() == 5);
  std::set<VirtAddr> seen;
  for (int i = 0; i < 5; ++i) {
    auto op = s.next();
    REQUIRE(op);
    CHECK(op->va % kHugePageSize == 0);
    seen.insert(op->va);
  }
  CHECK(seen.size() == 5);
  for (int i = 0; i < 50; ++i) {
    auto op = s.next();
    REQUIRE(op);
    CHECK((op->va >> 21) < 5);  // sampled access stays inside the footprint
  }
}

TEST_CASE("stream rejects degenerate specs") {
  WorkloadSpec spec;
  CHECK_THROWS_AS(AccessStream(spec, PageSizeMode::Base4K, 0),
                  InvalidOperation);
  spec.footprint_bytes = kPageSize;
  spec.base_va = 0x123;  // unaligned
  CHECK_THROWS_AS(AccessStream(spec, PageSizeMode::Base4K, 0),
                  InvalidOperation);
}

TEST_CASE("traces round trip through their text form") {
  std::string path = "trace_roundtrip_test.txt";
  std::vector<TraceRecord> recs = {
      {0x7f0000001000, false, 0},
      {0xdeadbeef000, true, 5},
      {0x0, false, 7},
  };
  save_trace(path, recs);
  auto back = load_trace(path);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].va == recs[i].va);
    CHECK(back[i].is_write == recs[i].is_write);
    CHECK(back[i].cpu == recs[i].cpu);
  }
  std::remove(path.c_str());
}

TEST_CASE("trace loading flags the offending line") {
  std::string path = "trace_badline_test.txt";
  {
    FILE* f = fopen(path.c_str(), "w");
    REQUIRE(f);
    fputs("# header comment\n", f);
    fputs("R 1000 0\n", f);
    fputs("X 2000 1\n", f);
    fclose(f);
  }
  try {
    load_trace(path);
    FAIL("expected a parse error");
  } catch (const SimError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_trace("no_such_trace_file.txt"), SimError);
}
