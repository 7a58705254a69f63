#include <set>

#include "support.hpp"

using namespace sainet;

namespace {

struct Rect {
  int x0, y0, x1, y1;  // inclusive
  double d;
};

DisparityMap layered(int h, int w, double background, const std::vector<Rect>& rects) {
  DisparityMap m(h, w, background);
  for (const auto& r : rects)
    for (int y = r.y0; y <= r.y1; ++y)
      for (int x = r.x0; x <= r.x1; ++x)
        if (y >= 0 && y < h && x >= 0 && x < w) m.at(y, x) = std::max(m.at(y, x), r.d);
  return m;
}

// Brute force: pixels with some 4-neighbour more than t further away.
std::set<Pixel> jump_pixels(const DisparityMap& m, double t) {
  std::set<Pixel> out;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= m.width || ny >= m.height) continue;
        if (m.at(y, x) - m.at(ny, nx) > t) out.insert({x, y});
      }
  return out;
}

// Chebyshev distance from (x,y) to the rectangle; 0 inside.
int outside_distance(const Rect& r, int x, int y) {
  const int dx = std::max({r.x0 - x, 0, x - r.x1}), dy = std::max({r.y0 - y, 0, y - r.y1});
  return std::max(dx, dy);
}

// Distance of an inside pixel to the rectangle's edge rows/columns (0 on the edge).
int inside_depth(const Rect& r, int x, int y) { return std::min({x - r.x0, r.x1 - x, y - r.y0, r.y1 - y}); }

MaskPair square_pair(int size, const Rect& r, int cw, int sw) {
  const auto depth = layered(size, size, 2.0, {r});
  const auto chains = find_discontinuities(depth, 3.0);
  EXPECT_EQ(chains.size(), 1u);
  const auto res = propagate_regions(chains.at(0), depth, cw, sw);
  EXPECT_TRUE(res.pair.has_value());
  return *res.pair;
}

}  // namespace

TEST(Discontinuities, ConstantMapHasNone) {
  EXPECT_TRUE(find_discontinuities(DisparityMap(16, 16, 4.0), 3.0).empty());
}

TEST(Discontinuities, SquareGivesOneClosedChain) {
  const Rect sq{11, 11, 20, 20, 20.0};
  const auto depth = layered(32, 32, 2.0, {sq});
  const auto chains = find_discontinuities(depth, 3.0);
  ASSERT_EQ(chains.size(), 1u);
  const std::set<Pixel> got(chains[0].pixels.begin(), chains[0].pixels.end());
  EXPECT_EQ(got, jump_pixels(depth, 3.0));
  EXPECT_EQ(got.size(), 36u);
  for (const auto& p : got) EXPECT_EQ(inside_depth(sq, p.x, p.y), 0);
  EXPECT_EQ(chains[0].anchor, (Pixel{11, 11}));
  EXPECT_EQ(chains[0].foreground_level, 20.0);
  // closed curve: no loose ends
  for (const auto& p : got) {
    int n = 0;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        if ((dx || dy) && got.count({p.x + dx, p.y + dy})) ++n;
    EXPECT_GE(n, 2);
  }
}

TEST(Discontinuities, TwoSquaresGiveTwoChains) {
  const auto depth = layered(32, 32, 2.0, {{2, 3, 9, 10, 15.0}, {18, 17, 27, 28, 12.0}});
  const auto chains = find_discontinuities(depth, 3.0);
  ASSERT_EQ(chains.size(), 2u);
  std::set<Pixel> all;
  for (const auto& c : chains) all.insert(c.pixels.begin(), c.pixels.end());
  EXPECT_EQ(all, jump_pixels(depth, 3.0));
}

TEST(Discontinuities, RandomMapsMatchBruteForce) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    DisparityMap m(12, 14);
    for (auto& v : m.values) v = rng.uniform(0.0, 10.0);
    const double t = rng.uniform(1.0, 6.0);
    std::set<Pixel> got;
    for (const auto& c : find_discontinuities(m, t)) got.insert(c.pixels.begin(), c.pixels.end());
    EXPECT_EQ(got, jump_pixels(m, t));
  }
  EXPECT_THROW(find_discontinuities(DisparityMap(4, 4), 0.0), ContractViolation);
}

TEST(Propagate, SquareBandsWidthFive) {
  const Rect sq{11, 11, 20, 20, 20.0};
  const auto pair = square_pair(32, sq, 5, 5);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const int out = outside_distance(sq, x, y);
      EXPECT_EQ(pair.context.at(y, x), out >= 1 && out <= 5) << x << "," << y;
      EXPECT_EQ(pair.synthesis.at(y, x), out == 0 && inside_depth(sq, x, y) < 5) << x << "," << y;
    }
}

TEST(Propagate, WidthOneGivesSinglePixelBands) {
  const Rect sq{11, 11, 20, 20, 20.0};
  const auto pair = square_pair(32, sq, 1, 1);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const int out = outside_distance(sq, x, y);
      EXPECT_EQ(pair.context.at(y, x), out == 1);
      EXPECT_EQ(pair.synthesis.at(y, x), out == 0 && inside_depth(sq, x, y) == 0);
    }
}

TEST(Propagate, LargerSquareUnequalWidths) {
  const Rect sq{12, 10, 27, 29, 30.0};
  const auto pair = square_pair(40, sq, 3, 4);
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x) {
      const int out = outside_distance(sq, x, y);
      EXPECT_EQ(pair.context.at(y, x), out >= 1 && out <= 3);
      EXPECT_EQ(pair.synthesis.at(y, x), out == 0 && inside_depth(sq, x, y) < 4);
    }
}

TEST(Propagate, InvariantsOnRandomFixtures) {
  Rng rng(2);
  std::size_t pairs = 0;
  for (int trial = 0; trial < 100; ++trial) {
    // separated objects, possibly cut by the canvas border
    std::vector<Rect> rects;
    const int n = 1 + static_cast<int>(rng.uniform_int(0, 2));
    while (static_cast<int>(rects.size()) < n) {
      const int x0 = static_cast<int>(rng.uniform_int(-4, 30)), y0 = static_cast<int>(rng.uniform_int(-4, 30));
      const Rect r{x0, y0, x0 + static_cast<int>(rng.uniform_int(2, 12)), y0 + static_cast<int>(rng.uniform_int(2, 12)),
                   static_cast<double>(rng.uniform_int(6, 30))};
      bool clear = true;
      for (const auto& o : rects)
        clear = clear && (r.x0 > o.x1 + 1 || o.x0 > r.x1 + 1 || r.y0 > o.y1 + 1 || o.y0 > r.y1 + 1);
      if (clear) rects.push_back(r);
    }
    const auto depth = layered(36, 36, rng.uniform(0.0, 3.0), rects);
    const int cw = static_cast<int>(rng.uniform_int(1, 6)), sw = static_cast<int>(rng.uniform_int(1, 6));
    for (const auto& chain : find_discontinuities(depth, 3.0)) {
      const auto res = propagate_regions(chain, depth, cw, sw);
      if (!res.pair) {
        EXPECT_FALSE(res.warning.empty());
        continue;
      }
      ++pairs;
      const auto& p = *res.pair;
      EXPECT_TRUE(masks_disjoint(p.context, p.synthesis));
      EXPECT_TRUE(p.context.any());
      EXPECT_TRUE(p.synthesis.any());
      // the hole's discontinuity side touches context
      for (const auto& q : chain.pixels) {
        EXPECT_TRUE(p.synthesis.at(q.y, q.x));
        bool touch = false;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) touch = touch || p.context.get(q.y + dy, q.x + dx);
        EXPECT_TRUE(touch) << "chain pixel " << q.x << "," << q.y;
      }
    }
  }
  EXPECT_GT(pairs, 50u);
}

TEST(Propagate, ChainWithoutBackgroundIsSkipped) {
  DiscontinuityChain chain;
  chain.pixels = {{0, 0}, {1, 0}};
  chain.anchor = {0, 0};
  const Mask fg(4, 4, 1), bg(4, 4, 0);
  const auto res = propagate_regions(chain, fg, bg, 2, 2);
  EXPECT_FALSE(res.pair.has_value());
  EXPECT_NE(res.warning.find("no background"), std::string::npos);
  EXPECT_THROW(propagate_regions(chain, fg, bg, 0, 2), ContractViolation);
}

TEST(Propagate, TranslationEquivariant) {
  const Rect a{8, 9, 17, 19, 18.0}, b{8 + 5, 9 + 3, 17 + 5, 19 + 3, 18.0};
  const auto pa = square_pair(40, a, 4, 3), pb = square_pair(40, b, 4, 3);
  for (int y = 0; y + 3 < 40; ++y)
    for (int x = 0; x + 5 < 40; ++x) {
      EXPECT_EQ(pa.context.at(y, x), pb.context.at(y + 3, x + 5));
      EXPECT_EQ(pa.synthesis.at(y, x), pb.synthesis.at(y + 3, x + 5));
    }
  EXPECT_EQ(pa.cropped().context, pb.cropped().context);
}

namespace {

std::vector<BankSource> square_sources(int count) {
  std::vector<BankSource> out;
  Rng rng(3);
  for (int i = 0; i < count; ++i) {
    const int x0 = static_cast<int>(rng.uniform_int(6, 30)), y0 = static_cast<int>(rng.uniform_int(6, 30));
    BankSource s;
    s.id = "scene_" + std::to_string(i);
    s.depth = layered(48, 48, 2.0, {{x0, y0, x0 + 10, y0 + 10, 16.0}});
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST(BuildBank, OneEntryPerSquareScene) {
  MaskBankParams p;
  p.context_width = p.synthesis_width = 4;
  const auto rep = build_bank(square_sources(10), p);
  EXPECT_EQ(rep.bank.size(), 10u);
  for (const auto& e : rep.bank.entries) {
    EXPECT_TRUE(masks_disjoint(e.context, e.synthesis));
    EXPECT_TRUE(e.context.any() && e.synthesis.any());
  }
}

TEST(BuildBank, LabelsGiveOneEntryPerObject) {
  std::vector<BankSource> sources(2);
  sources[0].id = "a";
  sources[0].labels = LabelMap(30, 30);
  for (int y = 3; y < 10; ++y)
    for (int x = 4; x < 12; ++x) sources[0].labels->at(y, x) = 1;
  for (int y = 15; y < 25; ++y)
    for (int x = 14; x < 26; ++x) sources[0].labels->at(y, x) = 2;
  sources[1].id = "b";
  sources[1].labels = LabelMap(30, 30);
  const auto rep = build_bank(sources, MaskBankParams::for_crop(64));
  EXPECT_EQ(rep.bank.size(), 2u);
}

TEST(BuildBank, Deterministic) {
  MaskBankParams p;
  p.context_width = p.synthesis_width = 3;
  const auto a = build_bank(square_sources(6), p);
  auto shuffled = square_sources(6);
  std::reverse(shuffled.begin(), shuffled.end());
  const auto b = build_bank(shuffled, p);
  ASSERT_EQ(a.bank.size(), b.bank.size());
  for (std::size_t i = 0; i < a.bank.size(); ++i) EXPECT_EQ(a.bank.entries[i], b.bank.entries[i]);
}

TEST(BuildBank, EmptyDatasetIsAnError) {
  try {
    build_bank({}, MaskBankParams{});
    FAIL() << "expected an error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("no input images"), std::string::npos);
  }
}

TEST(BuildBank, SyntheticScenesSatisfyInvariants) {
  SyntheticSceneParams sp;
  const auto scenes = make_synthetic_set(sp, 10, 42);
  std::vector<BankSource> sources;
  for (const auto& s : scenes) sources.push_back({s.sample.id, s.sample.gt_disparity, std::nullopt});
  const auto rep = build_bank(sources, MaskBankParams::for_crop(64));
  EXPECT_GE(rep.bank.size(), 10u);
  for (const auto& e : rep.bank.entries) {
    EXPECT_TRUE(masks_disjoint(e.context, e.synthesis));
    EXPECT_TRUE(e.context.any() && e.synthesis.any());
  }
}
