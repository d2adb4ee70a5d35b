#ifndef STEPGRADE_UNITS_HPP
#define STEPGRADE_UNITS_HPP

#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace stepgrade {

/// Exponents over the SI base dimensions, in the order m, kg, s, A, K, mol, cd.
using Dimension = std::array<int, 7>;

inline constexpr std::array<std::string_view, 7> kBaseDimensionNames = {"m", "kg", "s", "A", "K", "mol", "cd"};

inline Dimension operator+(Dimension a, const Dimension& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

inline Dimension scaled(Dimension a, int k) {
  for (int& e : a) e *= k;
  return a;
}

struct UnitInfo {
  double factor = 1.0;  // multiply a magnitude in this unit by factor to get SI
  Dimension dimension{};

  bool operator==(const UnitInfo&) const = default;
};

class UnitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lookup table from unit ids to SI conversion factors and base dimensions.
///
/// Composite unit strings ("m/s", "kg/(m s^2)", "C^2/(N m^2)", "s^{-1}") are
/// reduced with `resolve`, which also understands SI prefixes on table units
/// when the prefixed id is not itself in the table.
class UnitTable {
 public:
  UnitTable() = default;

  void add(std::string id, double factor, Dimension dimension) {
    if (!(factor > 0.0) || !std::isfinite(factor)) {
      throw UnitError("unit '" + id + "' must have a positive finite factor");
    }
    units_[std::move(id)] = UnitInfo{factor, dimension};
  }

  [[nodiscard]] const UnitInfo* find(std::string_view id) const {
    auto it = units_.find(std::string(id));
    return it == units_.end() ? nullptr : &it->second;
  }

  [[nodiscard]] std::size_t size() const { return units_.size(); }
  [[nodiscard]] const std::map<std::string, UnitInfo, std::less<>>& entries() const { return units_; }

  /// Reduce a unit expression to a single factor and dimension vector.
  [[nodiscard]] UnitInfo resolve(std::string_view text) const;

  /// Plain-text format: one unit per line, "id factor m kg s A K mol cd".
  /// Blank lines and lines starting with '#' are ignored.
  static UnitTable parse(std::istream& in) {
    UnitTable table;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      std::istringstream fields(line);
      std::string id;
      double factor = 0.0;
      Dimension dim{};
      fields >> id >> factor;
      for (int& e : dim) fields >> e;
      if (fields.fail()) {
        throw UnitError("unit table line " + std::to_string(line_no) + ": expected 'id factor m kg s A K mol cd'");
      }
      table.add(id, factor, dim);
    }
    return table;
  }

  static UnitTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UnitError("cannot open unit table '" + path + "'");
    return parse(in);
  }

  static const UnitTable& defaults();

 private:
  std::map<std::string, UnitInfo, std::less<>> units_;
};

inline constexpr std::string_view kDefaultUnitTable = R"(# id   factor            m kg  s  A  K mol cd
m       1                 1  0  0  0  0  0  0
kg      1                 0  1  0  0  0  0  0
s       1                 0  0  1  0  0  0  0
A       1                 0  0  0  1  0  0  0
K       1                 0  0  0  0  1  0  0
mol     1                 0  0  0  0  0  1  0
cd      1                 0  0  0  0  0  0  1
Hz      1                 0  0 -1  0  0  0  0
N       1                 1  1 -2  0  0  0  0
J       1                 2  1 -2  0  0  0  0
W       1                 2  1 -3  0  0  0  0
Pa      1                -1  1 -2  0  0  0  0
V       1                 2  1 -3 -1  0  0  0
C       1                 0  0  1  1  0  0  0
T       1                 0  1 -2 -1  0  0  0
eV      1.602176634e-19   2  1 -2  0  0  0  0
km/h    0.2777777777777778 1 0 -1  0  0  0  0
g       1e-3              0  1  0  0  0  0  0
cm      1e-2              1  0  0  0  0  0  0
km      1e3               1  0  0  0  0  0  0
mm      1e-3              1  0  0  0  0  0  0
min     60                0  0  1  0  0  0  0
h       3600              0  0  1  0  0  0  0
F       1                -2 -1  4  2  0  0  0
\Omega  1                 2  1 -3 -2  0  0  0
H       1                 2  1 -2 -2  0  0  0
Wb      1                 2  1 -2 -1  0  0  0
L       1e-3              3  0  0  0  0  0  0
)";

inline const UnitTable& UnitTable::defaults() {
  static const UnitTable table = [] {
    std::istringstream in{std::string(kDefaultUnitTable)};
    return UnitTable::parse(in);
  }();
  return table;
}

namespace detail {

struct SiPrefix {
  std::string_view symbol;
  double factor;
};

inline constexpr std::array<SiPrefix, 10> kSiPrefixes = {{
    {"G", 1e9}, {"M", 1e6}, {"k", 1e3}, {"c", 1e-2}, {"m", 1e-3},
    {"\\mu", 1e-6}, {"u", 1e-6}, {"n", 1e-9}, {"p", 1e-12}, {"f", 1e-15},
}};

// Recursive-descent reducer for unit strings:
//   expr   := term ('/' term)*
//   term   := factor (('*' | '\cdot' | '.' | ' ') factor)*
//   factor := '(' expr ')' | id ('^' int)?
class UnitReducer {
 public:
  UnitReducer(const UnitTable& table, std::string_view text) : table_(table), text_(text) {}

  UnitInfo run() {
    skip_space();
    if (pos_ == text_.size()) fail("empty unit");
    UnitInfo u = expr();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return u;
  }

 private:
  UnitInfo expr() {
    UnitInfo u = term();
    for (;;) {
      skip_space();
      if (!eat('/')) return u;
      UnitInfo d = term();
      u.factor /= d.factor;
      u.dimension = u.dimension + scaled(d.dimension, -1);
    }
  }

  UnitInfo term() {
    UnitInfo u = factor();
    for (;;) {
      std::size_t save = pos_;
      bool had_space = skip_space();
      if (eat('*') || eat('.') || eat_word("\\cdot") || eat_word("\\times")) {
        skip_space();
      } else if (!(had_space && pos_ < text_.size() && starts_factor(text_[pos_]))) {
        pos_ = save;
        return u;
      }
      UnitInfo v = factor();
      u.factor *= v.factor;
      u.dimension = u.dimension + v.dimension;
    }
  }

  UnitInfo factor() {
    skip_space();
    UnitInfo u;
    if (eat('(') || eat('{')) {
      u = expr();
      skip_space();
      if (!eat(')') && !eat('}')) fail("unbalanced parenthesis");
    } else {
      u = lookup(identifier());
    }
    std::size_t save = pos_;
    skip_space();
    if (eat('^')) {
      int k = exponent();
      u.factor = std::pow(u.factor, k);
      u.dimension = scaled(u.dimension, k);
    } else {
      pos_ = save;  // term() needs to see the space
    }
    return u;
  }

  int exponent() {
    skip_space();
    bool braced = eat('{');
    skip_space();
    int sign = 1;
    if (eat('-')) sign = -1;
    else eat('+');
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
      if (!braced) break;
    }
    if (start == pos_) fail("expected integer exponent");
    int value = std::stoi(std::string(text_.substr(start, pos_ - start)));
    skip_space();
    if (braced && !eat('}')) fail("unbalanced exponent braces");
    return sign * value;
  }

  std::string identifier() {
    std::size_t start = pos_;
    if (pos_ < text_.size() && text_[pos_] == '\\') ++pos_;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) fail("expected unit identifier");
    std::string id(text_.substr(start, pos_ - start));
    if (id == "\\mu") {
      // "\mu F": the prefix command is usually followed by a space
      while (pos_ < text_.size() && text_[pos_] == ' ') ++pos_;
      std::size_t rest = pos_;
      if (pos_ < text_.size() && text_[pos_] == '\\') ++pos_;
      while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      id += text_.substr(rest, pos_ - rest);
    }
    return id;
  }

  UnitInfo lookup(const std::string& id) {
    if (const UnitInfo* u = table_.find(id)) return *u;
    for (const auto& prefix : kSiPrefixes) {
      if (id.size() > prefix.symbol.size() && id.starts_with(prefix.symbol)) {
        if (const UnitInfo* u = table_.find(std::string_view(id).substr(prefix.symbol.size()))) {
          return UnitInfo{u->factor * prefix.factor, u->dimension};
        }
      }
    }
    fail("unknown unit '" + id + "'");
  }

  static bool starts_factor(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '(' || c == '{' || c == '\\';
  }

  bool skip_space() {
    std::size_t start = pos_;
    for (;;) {
      if (pos_ < text_.size() && (std::isspace(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '~')) {
        ++pos_;
      } else if (pos_ + 1 < text_.size() && text_[pos_] == '\\' && std::string_view(",;:! ").find(text_[pos_ + 1]) != std::string_view::npos) {
        pos_ += 2;
      } else {
        break;
      }
    }
    return pos_ != start;
  }

  bool eat(char c) {
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  bool eat_word(std::string_view w) {
    if (text_.substr(pos_).starts_with(w)) {
      pos_ += w.size();
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw UnitError("unit '" + std::string(text_) + "': " + msg);
  }

  const UnitTable& table_;
  std::string_view text_;
  std::size_t pos_ = 0;
};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace detail

inline UnitInfo UnitTable::resolve(std::string_view text) const {
  text = detail::trim(text);
  if (const UnitInfo* u = find(text)) return *u;
  return detail::UnitReducer(*this, text).run();
}

}  // namespace stepgrade

#endif  // STEPGRADE_UNITS_HPP
