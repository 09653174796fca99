#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <sstream>

#include "avare/data_io.hpp"
#include "support.hpp"

using namespace avare;

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string random_number(RngStream& rng) {
  char buf[64];
  switch (rng.index(6)) {
    case 0: std::snprintf(buf, sizeof buf, "%d", static_cast<int>(rng.index(2000)) - 1000); break;
    case 1: std::snprintf(buf, sizeof buf, "%.3f", rng.normal()); break;
    case 2: std::snprintf(buf, sizeof buf, "%.17g", rng.normal() * std::exp(10 * rng.normal())); break;
    case 3: std::snprintf(buf, sizeof buf, "%ge%d", std::floor(rng.uniform() * 90) / 10, static_cast<int>(rng.index(40)) - 20); break;
    case 4: std::snprintf(buf, sizeof buf, "+%.5g", rng.uniform()); break;
    default: std::snprintf(buf, sizeof buf, "0"); break;
  }
  return buf;
}

// Valid line plus its canonical form computed with strtod / printf.
std::pair<std::string, std::string> random_line(RngStream& rng) {
  static const char* labels[] = {"-1", "+1", "1", "0", "2", "3.5"};
  const std::string label = labels[rng.index(6)];
  std::string line = label, canon = fmt17(std::strtod(label.c_str(), nullptr));
  std::uint64_t idx = 0;
  const int count = static_cast<int>(rng.index(8));
  for (int k = 0; k < count; ++k) {
    idx += 1 + rng.index(5);
    const std::string v = random_number(rng);
    line += (rng.uniform() < 0.2 ? "\t" : " ") + std::to_string(idx) + ":" + v;
    const double x = std::strtod(v.c_str(), nullptr);
    if (x != 0) canon += " " + std::to_string(idx) + ":" + fmt17(x);
  }
  if (rng.uniform() < 0.1) line += "  ";
  return {line, canon};
}

std::string mutate(RngStream& rng, std::string line) {
  static const char junk[] = ":+-.eE0123456789 \tx#nai\x01\xff";
  const int edits = 1 + static_cast<int>(rng.index(3));
  for (int k = 0; k < edits; ++k) {
    const std::size_t pos = line.empty() ? 0 : rng.index(line.size() + 1);
    switch (rng.index(4)) {
      case 0:
        if (!line.empty() && pos < line.size()) line.erase(pos, 1);
        break;
      case 1: line.insert(pos, 1, junk[rng.index(sizeof junk - 1)]); break;
      case 2:
        if (pos < line.size()) line[pos] = junk[rng.index(sizeof junk - 1)];
        break;
      default: line.insert(pos, std::to_string(rng.index(100000))); break;
    }
  }
  return line;
}

RunRecord random_record(RngStream& rng, std::size_t steps) {
  RunRecord r;
  const double specials[] = {kNaN, 0.0, -0.0, 1e-310, 4.9e-324, 1.7976931348623157e308, -2.5, 0.1};
  for (std::size_t k = 0; k < steps; ++k) {
    r.t.push_back(k + 1 + rng.index(3));
    for (auto* col : {&r.alpha, &r.eps, &r.cost, &r.opt_cost, &r.cum_regret, &r.subopt, &r.rel_err, &r.dx_norm}) {
      const double v = rng.uniform() < 0.2 ? specials[rng.index(8)] : rng.normal() * std::exp(20 * rng.normal());
      col->push_back(v);
    }
  }
  return r;
}

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

}  // namespace

TEST_CASE("LIBSVM examples") {
  const auto d = parse_libsvm("1 1:0.5 3:2.0\n");
  REQUIRE(d.size() == 1);
  REQUIRE(d.dim() == 3);
  CHECK(d.features(0, 0) == 0.5);
  CHECK(d.features(0, 1) == 0);
  CHECK(d.features(0, 2) == 2.0);
  CHECK(d.label_values[static_cast<std::size_t>(d.labels[0])] == 1.0);

  const auto b = parse_libsvm("-1 2:1\n+1 1:1\n");
  CHECK(b.labels == std::vector<int>{0, 1});
  CHECK(b.classes == 2);
  CHECK(b.label_values == std::vector<double>{-1, 1});

  const auto multi = parse_libsvm("3 1:1\n1 1:2\r\n\n  \n2 2:1\n7 1:1\n");
  CHECK(multi.labels == std::vector<int>{2, 0, 1, 3});
  CHECK(multi.classes == 4);

  CHECK(parse_libsvm("1 2:1\n", LibsvmOptions{5}).dim() == 5);
  CHECK_THROWS_AS(parse_libsvm("1 6:1\n", LibsvmOptions{5}), ParseError);
}

TEST_CASE("LIBSVM errors carry positions") {
  auto where = [](const std::string& text) -> std::pair<std::size_t, std::size_t> {
    try {
      parse_libsvm(text);
    } catch (const ParseError& e) {
      return {e.line(), e.column()};
    }
    return {0, 0};
  };
  CHECK(where("1 3:1 2:1\n") == std::pair<std::size_t, std::size_t>{1, 7});
  CHECK(where("1 1:1\nx 1:1\n") == std::pair<std::size_t, std::size_t>{2, 1});
  CHECK(where("1 1:1\n1 a:1\n") == std::pair<std::size_t, std::size_t>{2, 3});
  CHECK(where("1 1:\n") == std::pair<std::size_t, std::size_t>{1, 5});
  CHECK(where("1 0:1\n") == std::pair<std::size_t, std::size_t>{1, 3});
  CHECK(where("1 1:1 1:2\n") == std::pair<std::size_t, std::size_t>{1, 7});
  CHECK(where("1 1:nan\n") == std::pair<std::size_t, std::size_t>{1, 5});
  CHECK(where("1 11\n") == std::pair<std::size_t, std::size_t>{1, 3});
  CHECK(where("") == std::pair<std::size_t, std::size_t>{1, 1});
  CHECK(where("1 99999999999:1\n").first == 1);
  CHECK(where("1 1:1e999\n").first == 1);
  CHECK(where("++1 1:1\n").first == 1);
}

TEST_CASE("LIBSVM round trip over a fuzz corpus") {
  RngStream rng(2718, 0);
  std::string text, canon;
  std::vector<std::string> lines;
  for (int k = 0; k < 1000; ++k) {
    auto [line, c] = random_line(rng);
    lines.push_back(line);
    text += line + "\n";
    canon += c + "\n";
  }
  const auto d = parse_libsvm(text);
  std::ostringstream out;
  write_libsvm(out, d);
  CHECK(out.str() == canon);
  // Writing is a fixed point.
  std::ostringstream again;
  write_libsvm(again, parse_libsvm(out.str()));
  CHECK(again.str() == out.str());

  // Mutations either parse or fail with an in-range position, and the
  // document-level error names the first bad line.
  std::size_t parsed = 0, rejected = 0;
  std::string doc;
  std::size_t first_bad = 0;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const std::string m = mutate(rng, lines[k]);
    doc += m + "\n";
    try {
      parse_libsvm(m);
      ++parsed;
    } catch (const ParseError& e) {
      ++rejected;
      const bool blank = m.find_first_not_of(" \t") == std::string::npos;
      // A blank line holds no example; the error then points past the end.
      REQUIRE(e.line() == (blank && !m.empty() ? 2u : 1u));
      REQUIRE(e.column() >= 1);
      REQUIRE(e.column() <= m.size() + 1);
      if (first_bad == 0 && !blank) first_bad = k + 1;
    }
  }
  CHECK(parsed + rejected == 1000);
  CHECK(rejected > 100);
  CHECK(parsed > 50);
  REQUIRE(first_bad > 0);
  try {
    parse_libsvm(doc);
    FAIL("mutated corpus should not parse");
  } catch (const ParseError& e) {
    CHECK(e.line() == first_bad);
  }
}

TEST_CASE("dense CSV") {
  const auto d = parse_csv("y,a,b\n1, 2.5 ,3\n0,-1,4e1\n", CsvOptions{true, 0});
  CHECK(d.size() == 2);
  CHECK(d.dim() == 2);
  CHECK(d.features(0, 0) == 2.5);
  CHECK(d.features(1, 1) == 40);
  CHECK(d.labels == std::vector<int>{1, 0});

  const auto last = parse_csv("2.5,3,1\n-1,4,0\n", CsvOptions{false, -1});
  CHECK(last.features(1, 0) == -1);
  CHECK(last.labels == std::vector<int>{1, 0});

  try {
    parse_csv("1,2,3\n1,x,3\n");
    FAIL("expected error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() == 3);
  }
  CHECK_THROWS_AS(parse_csv("1,2,3\n1,2\n"), ParseError);
  CHECK_THROWS_AS(parse_csv("1\n2\n"), ParseError);
  CHECK_THROWS_AS(parse_csv(""), ParseError);
  CHECK_THROWS_AS(parse_csv("1,2\n", CsvOptions{false, 5}), std::invalid_argument);
}

TEST_CASE("feature normalization") {
  RngStream rng(5, 0);
  MatrixXd f(50, 4);
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    for (Eigen::Index j = 0; j < f.cols(); ++j) f(i, j) = 3 + 5 * rng.normal();
  f.row(4).setZero();
  f.col(2).setConstant(7);

  MatrixXd s = f;
  normalize_features(s, Normalization::standardize);
  for (Eigen::Index j : {0, 1, 3}) {
    CHECK(std::abs(s.col(j).mean()) <= 1e-12);
    CHECK(s.col(j).squaredNorm() / 50 == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(s.col(2).isZero());
  MatrixXd twice = s;
  normalize_features(twice, Normalization::standardize);
  CHECK((twice - s).cwiseAbs().maxCoeff() <= 1e-12);

  MatrixXd u = f;
  normalize_features(u, Normalization::unit_norm);
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    CHECK(u.row(i).norm() == doctest::Approx(1.0).epsilon(1e-14));
  }
  MatrixXd z = MatrixXd::Zero(2, 3);
  normalize_features(z, Normalization::unit_norm);
  CHECK(z.isZero());
  MatrixXd n = f;
  normalize_features(n, Normalization::none);
  CHECK(n == f);
}

TEST_CASE("trace round trip is bit exact") {
  RngStream rng(6, 0);
  const auto r = random_record(rng, 2000);
  std::ostringstream out;
  write_trace_csv(out, r);
  std::istringstream in(out.str());
  const auto back = read_trace_csv(in);
  CHECK(back.t == r.t);
  CHECK(bits_equal(back.alpha, r.alpha));
  CHECK(bits_equal(back.eps, r.eps));
  CHECK(bits_equal(back.cost, r.cost));
  CHECK(bits_equal(back.opt_cost, r.opt_cost));
  CHECK(bits_equal(back.cum_regret, r.cum_regret));
  CHECK(bits_equal(back.subopt, r.subopt));
  CHECK(bits_equal(back.rel_err, r.rel_err));
  CHECK(bits_equal(back.dx_norm, r.dx_norm));
  std::ostringstream again;
  write_trace_csv(again, back);
  CHECK(again.str() == out.str());
  CHECK(out.str().find("nan") != std::string::npos);
  CHECK(out.str().rfind("t,alpha,eps,cost,opt_cost,cum_regret,subopt,rel_err,dx_norm\n", 0) == 0);

  std::istringstream bad_header("t,alpha\n1,2\n");
  CHECK_THROWS_AS(read_trace_csv(bad_header), ParseError);
  std::istringstream short_row("t,alpha,eps,cost,opt_cost,cum_regret,subopt,rel_err,dx_norm\n1,2,3\n");
  CHECK_THROWS_AS(read_trace_csv(short_row), ParseError);
  std::istringstream long_row("t,alpha,eps,cost,opt_cost,cum_regret,subopt,rel_err,dx_norm\n1,2,3,4,5,6,7,8,9,10\n");
  CHECK_THROWS_AS(read_trace_csv(long_row), ParseError);
}

TEST_CASE("aggregate CSV layout and helpers") {
  RngStream rng(7, 0);
  std::vector<RunRecord> rs;
  for (int s = 0; s < 3; ++s) {
    auto r = random_record(rng, 5);
    r.t = {1, 2, 3, 4, 5};
    r.n = 10;
    rs.push_back(r);
  }
  std::ostringstream out;
  write_aggregate_csv(out, aggregate(rs));
  std::istringstream lines(out.str());
  std::string header;
  std::getline(lines, header);
  CHECK(header.rfind("passes,t,alpha_mean,alpha_std,eps_mean,", 0) == 0);
  int rows = 0;
  for (std::string l; std::getline(lines, l);) ++rows;
  CHECK(rows == 5);

  CHECK(format_real(0.1) == "0.10000000000000001");
  CHECK(std::strtod(format_real(1.0 / 3).c_str(), nullptr) == 1.0 / 3);
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
}
