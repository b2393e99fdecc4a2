#include "medpath/data.hpp"

#include "medpath/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace medpath {

void TreatmentCoding::validate() const {
  if (!std::isfinite(a) || !std::isfinite(a_prime)) {
    throw CodingError("treatment levels must be finite");
  }
  if (a == a_prime) {
    throw CodingError("comparison and reference treatment levels coincide");
  }
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(Matrix c0, Vector a, Matrix c1, Vector m, Vector y,
                 std::vector<std::string> c0_names,
                 std::vector<std::string> c1_names, std::string a_name,
                 std::string m_name, std::string y_name)
    : c0_(std::move(c0)),
      a_(std::move(a)),
      c1_(std::move(c1)),
      m_(std::move(m)),
      y_(std::move(y)),
      c0_names_(std::move(c0_names)),
      c1_names_(std::move(c1_names)),
      a_name_(std::move(a_name)),
      m_name_(std::move(m_name)),
      y_name_(std::move(y_name)) {
  const Index n = a_.size();
  if (c0_.rows() != n || c1_.rows() != n || m_.size() != n || y_.size() != n) {
    throw ShapeError("dataset blocks have differing row counts");
  }
  if (static_cast<Index>(c0_names_.size()) != c0_.cols() ||
      static_cast<Index>(c1_names_.size()) != c1_.cols()) {
    throw ShapeError("column name lists do not match block widths");
  }
  for (Index i = 0; i < n; ++i) {
    if (a_[i] != kReferenceLevel && a_[i] != kComparisonLevel) {
      throw CodingError("treatment column must be recoded to {0,1}; row " +
                        std::to_string(i) + " has " + std::to_string(a_[i]));
    }
  }
  if (!c0_.allFinite() || !c1_.allFinite() || !m_.allFinite() ||
      !y_.allFinite()) {
    throw IngestionError("dataset contains non-finite values");
  }
  std::set<std::string> seen;
  auto claim = [&](const std::string& name) {
    if (name.empty()) throw SchemaError("empty column name");
    if (!seen.insert(name).second) {
      throw SchemaError("duplicate column name '" + name + "'");
    }
  };
  for (const auto& s : c0_names_) claim(s);
  for (const auto& s : c1_names_) claim(s);
  claim(a_name_);
  claim(m_name_);
  claim(y_name_);
  // "A" and "M" are reserved aliases for the treatment and mediator.
  for (const auto* block : {&c0_names_, &c1_names_}) {
    for (const auto& s : *block) {
      if (s == "A" || s == "M") {
        throw SchemaError("covariate name '" + s + "' is reserved");
      }
    }
  }
}

Vector Dataset::column(std::string_view name) const {
  if (name == "A" || name == a_name_) return a_;
  if (name == "M" || name == m_name_) return m_;
  for (std::size_t j = 0; j < c0_names_.size(); ++j) {
    if (c0_names_[j] == name) return c0_.col(static_cast<Index>(j));
  }
  for (std::size_t j = 0; j < c1_names_.size(); ++j) {
    if (c1_names_[j] == name) return c1_.col(static_cast<Index>(j));
  }
  throw FormulaError("unresolved column name '" + std::string(name) + "'");
}

bool Dataset::has_column(std::string_view name) const {
  if (name == "A" || name == "M" || name == a_name_ || name == m_name_) {
    return true;
  }
  return std::find(c0_names_.begin(), c0_names_.end(), name) !=
             c0_names_.end() ||
         std::find(c1_names_.begin(), c1_names_.end(), name) !=
             c1_names_.end();
}

Dataset Dataset::rows(std::span<const Index> idx) const {
  const Index k = static_cast<Index>(idx.size());
  Matrix c0(k, p0()), c1(k, p1());
  Vector a(k), m(k), y(k);
  for (Index r = 0; r < k; ++r) {
    const Index i = idx[static_cast<std::size_t>(r)];
    c0.row(r) = c0_.row(i);
    c1.row(r) = c1_.row(i);
    a[r] = a_[i];
    m[r] = m_[i];
    y[r] = y_[i];
  }
  return Dataset(std::move(c0), std::move(a), std::move(c1), std::move(m),
                 std::move(y), c0_names_, c1_names_, a_name_, m_name_,
                 y_name_);
}

Dataset Dataset::with_c1(Matrix c1) const {
  return Dataset(c0_, a_, std::move(c1), m_, y_, c0_names_, c1_names_,
                 a_name_, m_name_, y_name_);
}

Dataset Dataset::with_y(Vector y) const {
  return Dataset(c0_, a_, c1_, m_, std::move(y), c0_names_, c1_names_,
                 a_name_, m_name_, y_name_);
}

Index Dataset::count_arm(Arm arm) const {
  const double level = level_of(arm);
  return static_cast<Index>((a_.array() == level).count());
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

bool is_missing(std::string_view cell) {
  return cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" ||
         cell == "nan" || cell == ".";
}

}  // namespace

Dataset parse_csv(std::string_view text, const Schema& schema,
                  const TreatmentCoding& coding) {
  coding.validate();
  std::vector<std::string_view> lines;
  {
    std::size_t start = 0;
    while (start <= text.size()) {
      auto pos = text.find('\n', start);
      if (pos == std::string_view::npos) pos = text.size();
      std::string_view line = text.substr(start, pos - start);
      if (!trim(line).empty()) lines.push_back(line);
      start = pos + 1;
    }
  }
  if (lines.empty()) throw SchemaError("CSV has no header row");

  const auto header = split_commas(lines.front());
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t j = 0; j < header.size(); ++j) {
    position.emplace(std::string(header[j]), j);
  }
  auto locate = [&](const std::string& name) {
    auto it = position.find(name);
    if (it == position.end()) {
      throw SchemaError("missing column '" + name + "'");
    }
    return it->second;
  };
  std::vector<std::size_t> c0_pos, c1_pos;
  for (const auto& s : schema.c0) c0_pos.push_back(locate(s));
  const std::size_t a_pos = locate(schema.a);
  for (const auto& s : schema.c1) c1_pos.push_back(locate(s));
  const std::size_t m_pos = locate(schema.m);
  const std::size_t y_pos = locate(schema.y);

  const Index n = static_cast<Index>(lines.size()) - 1;
  Matrix c0(n, static_cast<Index>(c0_pos.size()));
  Matrix c1(n, static_cast<Index>(c1_pos.size()));
  Vector a(n), m(n), y(n);

  for (Index i = 0; i < n; ++i) {
    const auto cells = split_commas(lines[static_cast<std::size_t>(i) + 1]);
    const std::size_t file_row = static_cast<std::size_t>(i) + 2;
    if (cells.size() != header.size()) {
      throw ParseError("row " + std::to_string(file_row) + ": expected " +
                       std::to_string(header.size()) + " cells, found " +
                       std::to_string(cells.size()));
    }
    auto number = [&](std::size_t j) {
      const std::string_view cell = cells[j];
      if (is_missing(cell)) {
        throw IngestionError("row " + std::to_string(file_row) + ", column '" +
                             std::string(header[j]) + "': missing value");
      }
      double v = 0.0;
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (*first == '+') ++first;
      const auto res = std::from_chars(first, last, v);
      if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
        throw ParseError("row " + std::to_string(file_row) + ", column '" +
                         std::string(header[j]) + "': non-numeric value '" +
                         std::string(cell) + "'");
      }
      return v;
    };
    for (std::size_t k = 0; k < c0_pos.size(); ++k) {
      c0(i, static_cast<Index>(k)) = number(c0_pos[k]);
    }
    for (std::size_t k = 0; k < c1_pos.size(); ++k) {
      c1(i, static_cast<Index>(k)) = number(c1_pos[k]);
    }
    const double raw_a = number(a_pos);
    if (raw_a == coding.a) {
      a[i] = kComparisonLevel;
    } else if (raw_a == coding.a_prime) {
      a[i] = kReferenceLevel;
    } else {
      std::ostringstream msg;
      msg << "row " << file_row << ": treatment value " << raw_a
          << " is neither a=" << coding.a << " nor a'=" << coding.a_prime;
      throw CodingError(msg.str());
    }
    m[i] = number(m_pos);
    y[i] = number(y_pos);
  }

  if ((a.array() == kComparisonLevel).count() == 0 ||
      (a.array() == kReferenceLevel).count() == 0) {
    throw CodingError("both treatment levels must appear in the data");
  }
  return Dataset(std::move(c0), std::move(a), std::move(c1), std::move(m),
                 std::move(y), schema.c0, schema.c1, schema.a, schema.m,
                 schema.y);
}

Dataset load_csv(const std::string& path, const Schema& schema,
                 const TreatmentCoding& coding) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), schema, coding);
}

// ---------------------------------------------------------------------------
// Terms and formulas

void Term::multiply(const std::string& name, int k) {
  if (name.empty()) throw FormulaError("empty variable name in term");
  if (k < 1) throw FormulaError("power must be a positive integer");
  auto it = std::lower_bound(
      factors_.begin(), factors_.end(), name,
      [](const auto& f, const std::string& s) { return f.first < s; });
  if (it != factors_.end() && it->first == name) {
    it->second += k;
  } else {
    factors_.insert(it, {name, k});
  }
}

Term Term::column(std::string name) {
  Term t;
  t.multiply(name, 1);
  return t;
}

Term Term::power(std::string name, int k) {
  Term t;
  t.multiply(name, k);
  return t;
}

Term Term::interaction(const std::vector<std::string>& names) {
  Term t;
  for (const auto& s : names) t.multiply(s, 1);
  return t;
}

bool Term::references(std::string_view name) const {
  return std::any_of(factors_.begin(), factors_.end(),
                     [&](const auto& f) { return f.first == name; });
}

int Term::degree_in(std::span<const std::string> names) const {
  int d = 0;
  for (const auto& [v, k] : factors_) {
    if (std::find(names.begin(), names.end(), v) != names.end()) d += k;
  }
  return d;
}

std::string Term::label() const {
  if (factors_.empty()) return "1";
  std::string out;
  for (const auto& [v, k] : factors_) {
    if (!out.empty()) out += ':';
    out += v;
    if (k > 1) out += '^' + std::to_string(k);
  }
  return out;
}

Formula::Formula(std::vector<Term> terms) : terms_(std::move(terms)) {
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (terms_[i] == terms_[j]) {
        throw FormulaError("duplicate term '" + terms_[i].label() + "'");
      }
    }
  }
}

bool Formula::contains(const Term& t) const {
  return std::find(terms_.begin(), terms_.end(), t) != terms_.end();
}

bool Formula::has_intercept() const { return contains(Term::intercept()); }

bool Formula::references(std::string_view name) const {
  return std::any_of(terms_.begin(), terms_.end(),
                     [&](const Term& t) { return t.references(name); });
}

std::vector<std::string> Formula::labels() const {
  std::vector<std::string> out;
  out.reserve(terms_.size());
  for (const auto& t : terms_) out.push_back(t.label());
  return out;
}

std::string Formula::to_string() const {
  std::string out;
  for (const auto& t : terms_) {
    if (!out.empty()) out += " + ";
    out += t.label();
  }
  return out;
}

std::vector<std::string> Formula::variables() const {
  std::vector<std::string> out;
  for (const auto& t : terms_) {
    for (const auto& f : t.factors()) {
      if (std::find(out.begin(), out.end(), f.first) == out.end()) {
        out.push_back(f.first);
      }
    }
  }
  return out;
}

bool Formula::affine_in(std::span<const std::string> names) const {
  return std::all_of(terms_.begin(), terms_.end(),
                     [&](const Term& t) { return t.degree_in(names) <= 1; });
}

Formula Formula::without_terms_referencing(std::string_view name) const {
  std::vector<Term> kept;
  for (const auto& t : terms_) {
    if (!t.references(name)) kept.push_back(t);
  }
  return Formula(std::move(kept));
}

namespace {

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
           c == '.';
  });
}

}  // namespace

Formula parse_formula(std::string_view text) {
  std::vector<Term> terms;
  std::size_t start = 0;
  while (true) {
    auto pos = text.find('+', start);
    const std::string_view piece =
        trim(text.substr(start, pos == std::string_view::npos
                                    ? std::string_view::npos
                                    : pos - start));
    if (piece.empty()) {
      throw FormulaError("empty term in formula '" + std::string(text) + "'");
    }
    Term term;
    if (piece != "1") {
      std::vector<std::string> flat;
      std::size_t fstart = 0;
      while (true) {
        auto fpos = piece.find(':', fstart);
        std::string_view factor = trim(piece.substr(
            fstart, fpos == std::string_view::npos ? std::string_view::npos
                                                   : fpos - fstart));
        int k = 1;
        if (auto caret = factor.find('^'); caret != std::string_view::npos) {
          const auto exp = trim(factor.substr(caret + 1));
          const auto res =
              std::from_chars(exp.data(), exp.data() + exp.size(), k);
          if (res.ec != std::errc() || res.ptr != exp.data() + exp.size() ||
              k < 1) {
            throw FormulaError("bad exponent in term '" + std::string(piece) +
                               "'");
          }
          factor = trim(factor.substr(0, caret));
        }
        if (!valid_name(factor)) {
          throw FormulaError("bad variable name in term '" +
                             std::string(piece) + "'");
        }
        for (int r = 0; r < k; ++r) flat.emplace_back(factor);
        if (fpos == std::string_view::npos) break;
        fstart = fpos + 1;
      }
      term = Term::interaction(flat);
    }
    terms.push_back(std::move(term));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return Formula(std::move(terms));
}

// ---------------------------------------------------------------------------
// Design matrices

DesignMatrix build_design(const Dataset& data, const Formula& formula,
                          const DesignOverrides& overrides) {
  const Index n = data.n();
  if (overrides.m && static_cast<Index>(overrides.m->size()) != n) {
    throw ShapeError("mediator override length differs from row count");
  }
  std::unordered_map<std::string, Vector> cache;
  auto source = [&](const std::string& name) -> const Vector& {
    auto it = cache.find(name);
    if (it != cache.end()) return it->second;
    Vector col;
    if ((name == "A" || name == data.a_name()) && overrides.a) {
      col = Vector::Constant(n, *overrides.a);
    } else if ((name == "M" || name == data.m_name()) && overrides.m) {
      col = Eigen::Map<const Vector>(overrides.m->data(), n);
    } else {
      col = data.column(name);
    }
    return cache.emplace(name, std::move(col)).first->second;
  };

  DesignMatrix out;
  out.values.resize(n, static_cast<Index>(formula.size()));
  out.term_labels = formula.labels();
  for (std::size_t j = 0; j < formula.size(); ++j) {
    auto col = out.values.col(static_cast<Index>(j));
    col.setOnes();
    for (const auto& [name, k] : formula.terms()[j].factors()) {
      const Vector& v = source(name);
      for (int r = 0; r < k; ++r) col.array() *= v.array();
    }
  }
  if (!out.values.allFinite()) {
    throw ShapeError("design matrix has non-finite entries");
  }
  return out;
}

}  // namespace medpath
