#include <gtest/gtest.h>

#include <sstream>

#include "stepgrade/units.hpp"

using namespace stepgrade;

namespace {

constexpr Dimension kPerSecond{0, 0, -1, 0, 0, 0, 0};
constexpr Dimension kVelocity{1, 0, -1, 0, 0, 0, 0};

}  // namespace

TEST(Units, HertzIsInverseSecond) {
  const auto& t = UnitTable::defaults();
  UnitInfo hz = t.resolve("Hz");
  EXPECT_EQ(hz.factor, 1.0);
  EXPECT_EQ(hz.dimension, kPerSecond);
  EXPECT_EQ(t.resolve("s^{-1}"), hz);
  EXPECT_EQ(t.resolve("s^-1"), hz);
}

TEST(Units, CompositeReduction) {
  const auto& t = UnitTable::defaults();
  UnitInfo kmh = t.resolve("km/h");
  EXPECT_DOUBLE_EQ(kmh.factor, 1000.0 / 3600.0);
  EXPECT_EQ(kmh.dimension, kVelocity);
  UnitInfo parts = t.resolve("km / min");
  EXPECT_DOUBLE_EQ(parts.factor, 1000.0 / 60.0);
  EXPECT_EQ(parts.dimension, kVelocity);

  EXPECT_EQ(t.resolve("C^2/(N m^2)").dimension, (Dimension{-3, -1, 4, 2, 0, 0, 0}));
  EXPECT_EQ(t.resolve("kg\\cdot m/s^2").dimension, t.resolve("N").dimension);
  EXPECT_EQ(t.resolve("V\\cdot m").dimension, (Dimension{3, 1, -3, -1, 0, 0, 0}));
  EXPECT_EQ(t.resolve("m^{-1}").dimension, (Dimension{-1, 0, 0, 0, 0, 0, 0}));
}

TEST(Units, Prefixes) {
  const auto& t = UnitTable::defaults();
  EXPECT_DOUBLE_EQ(t.resolve("\\mu F").factor, 1e-6);
  EXPECT_DOUBLE_EQ(t.resolve("\\muF").factor, 1e-6);
  EXPECT_DOUBLE_EQ(t.resolve("kN").factor, 1e3);
  EXPECT_DOUBLE_EQ(t.resolve("nm").factor, 1e-9);
  // exact table entries win over prefix readings
  EXPECT_DOUBLE_EQ(t.resolve("mm").factor, 1e-3);
  EXPECT_DOUBLE_EQ(t.resolve("min").factor, 60.0);
  EXPECT_DOUBLE_EQ(t.resolve("eV").factor, 1.602176634e-19);
}

TEST(Units, UnknownAndMalformed) {
  const auto& t = UnitTable::defaults();
  EXPECT_THROW((void)t.resolve("furlong"), UnitError);
  EXPECT_THROW((void)t.resolve("m/(s"), UnitError);
  EXPECT_THROW((void)t.resolve(""), UnitError);
}

TEST(Units, TableFileFormat) {
  std::istringstream in("# comment\nft 0.3048 1 0 0 0 0 0 0\n\nmph 0.44704 1 0 -1 0 0 0 0  # trailing\n");
  UnitTable t = UnitTable::parse(in);
  EXPECT_DOUBLE_EQ(t.resolve("ft").factor, 0.3048);
  EXPECT_EQ(t.resolve("mph").dimension, kVelocity);
  EXPECT_EQ(t.find("m"), nullptr);

  std::istringstream bad("ft 0.3048 1 0 0\n");
  EXPECT_THROW(UnitTable::parse(bad), UnitError);
  std::istringstream neg("ft -1 1 0 0 0 0 0 0\n");
  EXPECT_THROW(UnitTable::parse(neg), UnitError);
}

TEST(Units, ShippedFileMatchesDefaults) {
  UnitTable loaded = UnitTable::load(STEPGRADE_DATA_DIR "/units.txt");
  for (const char* id : {"m", "Hz", "N", "J", "W", "Pa", "V", "C", "T", "eV", "km/h", "g", "cm", "F", "\\Omega"}) {
    EXPECT_EQ(loaded.resolve(id), UnitTable::defaults().resolve(id)) << id;
  }
}

TEST(Units, LatexSpacingBetweenFactors) {
  const auto& t = UnitTable::defaults();
  EXPECT_EQ(t.resolve("N\\,m"), t.resolve("N m"));
  EXPECT_EQ(t.resolve("C^2/(N\\,m^2)"), t.resolve("C^2/(N m^2)"));
}
