#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace medpath {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Source labels of the two treatment levels. After ingestion the treatment
/// column is recoded so that `a_prime` (reference) becomes 0 and `a`
/// (comparison) becomes 1.
struct TreatmentCoding {
  double a = 1.0;
  double a_prime = 0.0;

  void validate() const;
};

/// Recoded treatment values.
inline constexpr double kReferenceLevel = 0.0;   // a'
inline constexpr double kComparisonLevel = 1.0;  // a

enum class Arm { reference, comparison };

constexpr double level_of(Arm arm) {
  return arm == Arm::reference ? kReferenceLevel : kComparisonLevel;
}

/// Rectangular sample of (C0, A, C1, M, Y). Immutable once built; the
/// constructor enforces the block-shape, binary-A and unique-name invariants.
class Dataset {
 public:
  Dataset(Matrix c0, Vector a, Matrix c1, Vector m, Vector y,
          std::vector<std::string> c0_names, std::vector<std::string> c1_names,
          std::string a_name = "A", std::string m_name = "M",
          std::string y_name = "Y");

  Index n() const { return a_.size(); }
  Index p0() const { return c0_.cols(); }
  Index p1() const { return c1_.cols(); }

  const Matrix& c0() const { return c0_; }
  const Vector& a() const { return a_; }
  const Matrix& c1() const { return c1_; }
  const Vector& m() const { return m_; }
  const Vector& y() const { return y_; }

  const std::vector<std::string>& c0_names() const { return c0_names_; }
  const std::vector<std::string>& c1_names() const { return c1_names_; }
  const std::string& a_name() const { return a_name_; }
  const std::string& m_name() const { return m_name_; }
  const std::string& y_name() const { return y_name_; }

  /// Column by name. "A" and "M" always resolve to the treatment and
  /// mediator columns regardless of their source names. Throws FormulaError
  /// for unknown names.
  Vector column(std::string_view name) const;
  bool has_column(std::string_view name) const;

  /// Rows taken in the listed order (duplicates allowed).
  Dataset rows(std::span<const Index> idx) const;
  Dataset with_c1(Matrix c1) const;
  Dataset with_y(Vector y) const;

  Index count_arm(Arm arm) const;

 private:
  Matrix c0_;
  Vector a_;
  Matrix c1_;
  Vector m_;
  Vector y_;
  std::vector<std::string> c0_names_;
  std::vector<std::string> c1_names_;
  std::string a_name_;
  std::string m_name_;
  std::string y_name_;
};

/// Column roles for CSV ingestion.
struct Schema {
  std::vector<std::string> c0;
  std::string a;
  std::vector<std::string> c1;
  std::string m;
  std::string y;
};

Dataset load_csv(const std::string& path, const Schema& schema,
                 const TreatmentCoding& coding);
Dataset parse_csv(std::string_view text, const Schema& schema,
                  const TreatmentCoding& coding);

/// A monomial in named columns. The empty monomial is the intercept.
/// Factors are kept sorted by name, so `c0:A` and `A:c0` compare equal and
/// `x:x` equals `x^2`.
class Term {
 public:
  Term() = default;
  static Term intercept() { return {}; }
  static Term column(std::string name);
  static Term power(std::string name, int k);
  static Term interaction(const std::vector<std::string>& names);

  bool is_intercept() const { return factors_.empty(); }
  const std::vector<std::pair<std::string, int>>& factors() const {
    return factors_;
  }
  bool references(std::string_view name) const;
  /// Total degree in the named variables.
  int degree_in(std::span<const std::string> names) const;
  std::string label() const;

  friend bool operator==(const Term&, const Term&) = default;

 private:
  void multiply(const std::string& name, int k);
  std::vector<std::pair<std::string, int>> factors_;
};

/// Ordered, duplicate-free term list.
class Formula {
 public:
  Formula() = default;
  explicit Formula(std::vector<Term> terms);

  const std::vector<Term>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool contains(const Term& t) const;
  bool has_intercept() const;
  bool references(std::string_view name) const;
  std::vector<std::string> labels() const;
  std::string to_string() const;

  /// Every variable name used by any term.
  std::vector<std::string> variables() const;

  /// True when no term has total degree above one in `names`, i.e. the
  /// expanded regressors are affine in those variables once the others
  /// are held fixed.
  bool affine_in(std::span<const std::string> names) const;

  Formula without_terms_referencing(std::string_view name) const;

  friend bool operator==(const Formula&, const Formula&) = default;

 private:
  std::vector<Term> terms_;
};

/// Grammar: terms separated by '+'; `1` intercept; `name` column;
/// `name^k` power; `a:b[:c...]` product.
Formula parse_formula(std::string_view text);

struct DesignMatrix {
  Matrix values;
  std::vector<std::string> term_labels;

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
};

/// Substitutions applied to the A and/or M columns before expansion.
struct DesignOverrides {
  std::optional<double> a;
  std::optional<std::span<const double>> m;
};

DesignMatrix build_design(const Dataset& data, const Formula& formula,
                          const DesignOverrides& overrides = {});

}  // namespace medpath
