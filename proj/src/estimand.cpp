#include "causalem/causal.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>

namespace causalem {

namespace {

std::vector<int> sorted_unique(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

void free_vars_into(const EstimandExpr& e, std::vector<int>& out) {
  switch (e.kind) {
    case EstimandExpr::Kind::Constant:
      return;
    case EstimandExpr::Kind::Prob:
      for (std::size_t i = 0; i < e.targets.size(); ++i)
        if (e.target_states[i] < 0) out.push_back(e.targets[i]);
      for (std::size_t i = 0; i < e.given.size(); ++i)
        if (e.given_states[i] < 0) out.push_back(e.given[i]);
      return;
    case EstimandExpr::Kind::Sum: {
      std::vector<int> inner;
      free_vars_into(*e.children[0], inner);
      for (int v : inner)
        if (!std::binary_search(e.bound.begin(), e.bound.end(), v)) out.push_back(v);
      return;
    }
    case EstimandExpr::Kind::Product:
    case EstimandExpr::Kind::Quotient:
      for (const EstimandPtr& c : e.children) free_vars_into(*c, out);
      return;
  }
}

}  // namespace

EstimandPtr est_const(double value) {
  auto e = std::make_shared<EstimandExpr>();
  e->kind = EstimandExpr::Kind::Constant;
  e->value = value;
  return e;
}

EstimandPtr est_prob_at(std::vector<std::pair<int, int>> targets,
                        std::vector<std::pair<int, int>> given) {
  auto e = std::make_shared<EstimandExpr>();
  e->kind = EstimandExpr::Kind::Prob;
  std::sort(targets.begin(), targets.end());
  std::sort(given.begin(), given.end());
  for (auto& [v, s] : targets) {
    e->targets.push_back(v);
    e->target_states.push_back(s);
  }
  for (auto& [v, s] : given) {
    e->given.push_back(v);
    e->given_states.push_back(s);
  }
  for (std::size_t i = 1; i < e->targets.size(); ++i)
    if (e->targets[i] == e->targets[i - 1])
      throw Error("duplicate variable in prob targets");
  for (std::size_t i = 1; i < e->given.size(); ++i)
    if (e->given[i] == e->given[i - 1])
      throw Error("duplicate variable in prob conditioners");
  for (int t : e->targets)
    if (std::binary_search(e->given.begin(), e->given.end(), t))
      throw Error("variable on both sides of a prob conditioning bar");
  return e;
}

EstimandPtr est_prob(const std::vector<int>& targets, const std::vector<int>& given) {
  std::vector<std::pair<int, int>> t, g;
  for (int v : targets) t.push_back({v, -1});
  for (int v : given) g.push_back({v, -1});
  return est_prob_at(std::move(t), std::move(g));
}

EstimandPtr est_sum(std::vector<int> bound, EstimandPtr body) {
  auto e = std::make_shared<EstimandExpr>();
  e->kind = EstimandExpr::Kind::Sum;
  e->bound = sorted_unique(std::move(bound));
  if (e->bound.empty()) return body;
  e->children.push_back(std::move(body));
  return e;
}

EstimandPtr est_product(std::vector<EstimandPtr> children) {
  if (children.empty()) return est_const(1.0);
  if (children.size() == 1) return children[0];
  auto e = std::make_shared<EstimandExpr>();
  e->kind = EstimandExpr::Kind::Product;
  e->children = std::move(children);
  return e;
}

EstimandPtr est_ratio(EstimandPtr num, EstimandPtr den) {
  auto e = std::make_shared<EstimandExpr>();
  e->kind = EstimandExpr::Kind::Quotient;
  e->children.push_back(std::move(num));
  e->children.push_back(std::move(den));
  return e;
}

std::vector<int> free_vars(const EstimandPtr& expr) {
  std::vector<int> out;
  free_vars_into(*expr, out);
  return sorted_unique(std::move(out));
}

EstimandPtr simplify_estimand(const EstimandPtr& expr) {
  switch (expr->kind) {
    case EstimandExpr::Kind::Constant:
    case EstimandExpr::Kind::Prob:
      return expr;
    case EstimandExpr::Kind::Quotient: {
      auto e = std::make_shared<EstimandExpr>();
      e->kind = EstimandExpr::Kind::Quotient;
      e->children.push_back(simplify_estimand(expr->children[0]));
      e->children.push_back(simplify_estimand(expr->children[1]));
      return e;
    }
    case EstimandExpr::Kind::Product: {
      std::vector<EstimandPtr> flat;
      for (const EstimandPtr& c : expr->children) {
        EstimandPtr s = simplify_estimand(c);
        if (s->kind == EstimandExpr::Kind::Product)
          for (const EstimandPtr& g : s->children) flat.push_back(g);
        else if (s->kind == EstimandExpr::Kind::Constant && s->value == 1.0)
          continue;
        else
          flat.push_back(s);
      }
      return est_product(std::move(flat));
    }
    case EstimandExpr::Kind::Sum: {
      EstimandPtr body = simplify_estimand(expr->children[0]);
      std::vector<int> bound = expr->bound;
      // Merge nested sums when the bound sets cannot shadow each other.
      if (body->kind == EstimandExpr::Kind::Sum) {
        bool disjoint = true;
        for (int v : body->bound)
          if (std::binary_search(bound.begin(), bound.end(), v)) disjoint = false;
        if (disjoint) {
          for (int v : body->bound) bound.push_back(v);
          body = body->children[0];
        }
      }
      return est_sum(std::move(bound), std::move(body));
    }
  }
  return expr;
}

namespace {

std::string to_text_impl(const EstimandExpr& expr, const CausalDiagram& diagram) {
  std::ostringstream os;
  auto name_at = [&](int v, int s) {
    os << diagram.var(v).name;
    if (s >= 0) os << '=' << s;
  };
  switch (expr.kind) {
    case EstimandExpr::Kind::Constant: {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%g", expr.value);
      os << buf;
      break;
    }
    case EstimandExpr::Kind::Prob: {
      os << "prob(";
      for (std::size_t i = 0; i < expr.targets.size(); ++i) {
        if (i) os << ',';
        name_at(expr.targets[i], expr.target_states[i]);
      }
      if (!expr.given.empty()) {
        os << '|';
        for (std::size_t i = 0; i < expr.given.size(); ++i) {
          if (i) os << ',';
          name_at(expr.given[i], expr.given_states[i]);
        }
      }
      os << ')';
      break;
    }
    case EstimandExpr::Kind::Sum: {
      os << "sum{";
      for (std::size_t i = 0; i < expr.bound.size(); ++i) {
        if (i) os << ',';
        os << diagram.var(expr.bound[i]).name;
      }
      os << "}( " << to_text_impl(*expr.children[0], diagram) << " )";
      break;
    }
    case EstimandExpr::Kind::Product: {
      for (std::size_t i = 0; i < expr.children.size(); ++i) {
        if (i) os << " * ";
        const EstimandExpr& c = *expr.children[i];
        if (c.kind == EstimandExpr::Kind::Product)
          os << "( " << to_text_impl(c, diagram) << " )";
        else
          os << to_text_impl(c, diagram);
      }
      break;
    }
    case EstimandExpr::Kind::Quotient:
      os << "ratio(" << to_text_impl(*expr.children[0], diagram) << ", "
         << to_text_impl(*expr.children[1], diagram) << ')';
      break;
  }
  return os.str();
}

}  // namespace

std::string estimand_to_text(const EstimandPtr& expr, const CausalDiagram& diagram) {
  return to_text_impl(*expr, diagram);
}

namespace {

class EstimandParser {
 public:
  EstimandParser(const std::string& text, const CausalDiagram& diagram)
      : text_(text), g_(diagram) {}

  EstimandPtr parse() {
    EstimandPtr e = expr();
    skip_ws();
    if (pos_ != text_.size())
      throw ParseError("unexpected trailing text in estimand at offset " +
                       std::to_string(pos_));
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!eat(c))
      throw ParseError(std::string("expected '") + c + "' in estimand at offset " +
                       std::to_string(pos_));
  }

  std::string ident() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'')
        ++pos_;
      else
        break;
    }
    if (start == pos_)
      throw ParseError("expected a name in estimand at offset " + std::to_string(start));
    return text_.substr(start, pos_ - start);
  }

  std::pair<int, int> var_term() {
    const std::string name = ident();
    int state = -1;
    if (eat('=')) {
      skip_ws();
      std::size_t start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
        ++pos_;
      if (start == pos_)
        throw ParseError("expected a state after '=' at offset " + std::to_string(pos_));
      state = std::stoi(text_.substr(start, pos_ - start));
    }
    return {g_.var_id(name), state};
  }

  EstimandPtr expr() {
    std::vector<EstimandPtr> factors;
    factors.push_back(term());
    while (eat('*')) factors.push_back(term());
    return est_product(std::move(factors));
  }

  EstimandPtr term() {
    skip_ws();
    if (pos_ < text_.size() &&
        (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
      std::size_t used = 0;
      const double v = std::stod(text_.substr(pos_), &used);
      pos_ += used;
      return est_const(v);
    }
    if (eat('(')) {
      EstimandPtr e = expr();
      expect(')');
      return e;
    }
    const std::string word = ident();
    if (word == "sum") {
      expect('{');
      std::vector<int> bound;
      bound.push_back(g_.var_id(ident()));
      while (eat(',')) bound.push_back(g_.var_id(ident()));
      expect('}');
      expect('(');
      EstimandPtr body = expr();
      expect(')');
      return est_sum(std::move(bound), std::move(body));
    }
    if (word == "ratio") {
      expect('(');
      EstimandPtr num = expr();
      expect(',');
      EstimandPtr den = expr();
      expect(')');
      return est_ratio(std::move(num), std::move(den));
    }
    if (word == "prob") {
      expect('(');
      std::vector<std::pair<int, int>> targets, given;
      targets.push_back(var_term());
      while (eat(',')) targets.push_back(var_term());
      if (eat('|')) {
        given.push_back(var_term());
        while (eat(',')) given.push_back(var_term());
      }
      expect(')');
      return est_prob_at(std::move(targets), std::move(given));
    }
    throw ParseError("unknown estimand construct '" + word + "'");
  }

  const std::string& text_;
  const CausalDiagram& g_;
  std::size_t pos_ = 0;
};

}  // namespace

EstimandPtr parse_estimand(const std::string& text, const CausalDiagram& diagram) {
  return EstimandParser(text, diagram).parse();
}

}  // namespace causalem
