#include "support/discrete.hpp"

#include "medpath/rng.hpp"

#include <functional>
#include <string>
#include <vector>

namespace medpath::testing {

DiscreteLaw random_law(std::uint64_t seed) {
  Rng rng(seed);
  auto p = [&] { return rng.uniform(0.2, 0.8); };
  DiscreteLaw law;
  law.p_c0 = p();
  for (auto& v : law.p_a) v = p();
  for (auto& v : law.p_c1) v = p();
  for (auto& v : law.p_m) v = p();
  for (auto& cell : law.p_y) {
    double total = 0.0;
    for (auto& v : cell) total += (v = p());
    for (auto& v : cell) v /= total;
  }
  return law;
}

Dataset sample(const DiscreteLaw& law, Index n, std::uint64_t seed) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(seed, attempt);
    Matrix c0(n, 1), c1(n, 1);
    Vector a(n), m(n), y(n);
    std::array<int, 16> seen{};
    for (Index i = 0; i < n; ++i) {
      const int x0 = rng.bernoulli(law.p_c0);
      const int ai = rng.bernoulli(law.p_a[x0]);
      const int x1 = rng.bernoulli(law.p_c1[ai * 2 + x0]);
      const int mi = rng.bernoulli(law.p_m[(x1 * 2 + ai) * 2 + x0]);
      const int cell = ((mi * 2 + x1) * 2 + ai) * 2 + x0;
      const double u = rng.uniform();
      const auto& py = law.p_y[cell];
      const int yi = u < py[0] ? 0 : (u < py[0] + py[1] ? 1 : 2);
      c0(i, 0) = x0;
      a[i] = ai;
      c1(i, 0) = x1;
      m[i] = mi;
      y[i] = yi;
      ++seen[cell];
    }
    bool full = true;
    for (int s : seen) full = full && s > 0;
    if (full) {
      return Dataset(std::move(c0), std::move(a), std::move(c1), std::move(m),
                     std::move(y), {"c0"}, {"c1"});
    }
  }
}

namespace {

/// Sum of `value` over rows matching `pred`, and the match count.
std::pair<double, double> tally(const Dataset& d,
                                const std::function<bool(Index)>& pred,
                                const std::function<double(Index)>& value) {
  double s = 0.0, c = 0.0;
  for (Index i = 0; i < d.n(); ++i) {
    if (pred(i)) {
      s += value(i);
      c += 1.0;
    }
  }
  return {s, c};
}

double share(const Dataset& d, const std::function<bool(Index)>& num,
             const std::function<bool(Index)>& den) {
  const auto one = [](Index) { return 1.0; };
  const double k = tally(d, [&](Index i) { return den(i) && num(i); }, one).second;
  return k / tally(d, den, one).second;
}

}  // namespace

double enumeration_beta(const Dataset& d) {
  const auto& c0 = d.c0();
  const auto& c1 = d.c1();
  const auto& a = d.a();
  const auto& m = d.m();
  double beta = 0.0;
  for (int x0 = 0; x0 < 2; ++x0) {
    const double pc0 = share(d, [&](Index i) { return c0(i, 0) == x0; },
                             [](Index) { return true; });
    for (int x1 = 0; x1 < 2; ++x1) {
      const double pc1 = share(d, [&](Index i) { return c1(i, 0) == x1; },
                               [&](Index i) { return a[i] == 0 && c0(i, 0) == x0; });
      for (int mm = 0; mm < 2; ++mm) {
        const double pm = share(
            d, [&](Index i) { return m[i] == mm; },
            [&](Index i) { return c1(i, 0) == x1 && a[i] == 1 && c0(i, 0) == x0; });
        const auto [s, c] = tally(
            d,
            [&](Index i) {
              return m[i] == mm && c1(i, 0) == x1 && a[i] == 0 && c0(i, 0) == x0;
            },
            [&](Index i) { return d.y()[i]; });
        beta += pc0 * pc1 * pm * (s / c);
      }
    }
  }
  return beta;
}

double enumeration_mean(const Dataset& d, double level) {
  double out = 0.0;
  for (int x0 = 0; x0 < 2; ++x0) {
    const double pc0 = share(d, [&](Index i) { return d.c0()(i, 0) == x0; },
                             [](Index) { return true; });
    const auto [s, c] = tally(
        d, [&](Index i) { return d.a()[i] == level && d.c0()(i, 0) == x0; },
        [&](Index i) { return d.y()[i]; });
    out += pc0 * s / c;
  }
  return out;
}

double empirical_m_ratio(const Dataset& d, Index r) {
  auto f = [&](double level) {
    return share(d, [&](Index i) { return d.m()[i] == d.m()[r]; },
                 [&](Index i) {
                   return d.a()[i] == level && d.c1()(i, 0) == d.c1()(r, 0) &&
                          d.c0()(i, 0) == d.c0()(r, 0);
                 });
  };
  return f(1.0) / f(0.0);
}

double empirical_c1_ratio(const Dataset& d, Index r) {
  auto f = [&](double level) {
    return share(d, [&](Index i) { return d.c1()(i, 0) == d.c1()(r, 0); },
                 [&](Index i) {
                   return d.a()[i] == level && d.c0()(i, 0) == d.c0()(r, 0);
                 });
  };
  return f(1.0) / f(0.0);
}

namespace {

/// All 2^k products of the named binary variables, intercept first.
Formula all_monomials(const std::vector<std::string>& names) {
  std::vector<Term> terms;
  for (unsigned mask = 0; mask < (1u << names.size()); ++mask) {
    std::vector<std::string> f;
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (mask & (1u << j)) f.push_back(names[j]);
    }
    terms.push_back(f.empty() ? Term::intercept() : Term::interaction(f));
  }
  return Formula(std::move(terms));
}

}  // namespace

Formula saturated_b() { return all_monomials({"c0", "A", "c1", "M"}); }

Formula saturated_total_outcome() { return parse_formula("1 + A + c0 + A:c0"); }

NuisanceSpec saturated_spec() {
  NuisanceSpec s;
  s.cascade.kind = CascadeKind::regression;
  s.cascade.b = saturated_b();
  s.cascade.b_prime = parse_formula("1 + c0 + c1 + c0:c1");
  s.cascade.b_pprime = parse_formula("1 + c0");
  s.f_a_c0 = {parse_formula("1 + c0"), GlmFamily::logistic};
  s.c1_numerator = {parse_formula("1 + c0 + c1 + c0:c1"), GlmFamily::logistic};
  s.m_numerator = {all_monomials({"c0", "c1", "M"}), GlmFamily::logistic};
  return s;
}

}  // namespace medpath::testing
