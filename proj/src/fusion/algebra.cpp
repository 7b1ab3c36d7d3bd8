#include "fusenas/fusion/algebra.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

namespace fusenas::fusion {

namespace {

bool key_less(const ExprPtr& a, const ExprPtr& b) { return a->key() < b->key(); }

class Canonicalizer {
 public:
  ExprPtr run(const ExprPtr& e) {
    if (e->is_leaf()) return e;
    if (auto it = memo_.find(e.get()); it != memo_.end()) return it->second.second;
    std::vector<ExprPtr> kids;
    for (const auto& c : e->children()) {
      ExprPtr cc = run(c);
      if (e->is_nary() && cc->op() == e->op()) {
        kids.insert(kids.end(), cc->children().begin(), cc->children().end());
      } else {
        kids.push_back(std::move(cc));
      }
    }
    if (e->is_nary()) std::stable_sort(kids.begin(), kids.end(), key_less);
    ExprPtr out = Expr::with_children(*e, std::move(kids));
    memo_.emplace(e.get(), std::make_pair(e, out));
    return out;
  }

 private:
  // Holds the source alive so its address cannot be reused by a temporary.
  std::unordered_map<const Expr*, std::pair<ExprPtr, ExprPtr>> memo_;
};

enum class FactorSide { Elementwise, MatMulLeft, MatMulRight };

struct FactorChoice {
  FactorSide side;
  ExprPtr factor;
  std::vector<std::size_t> terms;  // AddN child indices containing the factor
};

std::string factor_tag(FactorSide side, const ExprPtr& f) {
  switch (side) {
    case FactorSide::Elementwise: return "*" + f->key();
    case FactorSide::MatMulLeft: return "<" + f->key();
    case FactorSide::MatMulRight: return ">" + f->key();
  }
  return {};
}

std::optional<FactorChoice> most_common_factor(const Expr& sum) {
  std::map<std::string, FactorChoice> seen;  // ordered: ties -> smallest tag
  const auto& terms = sum.children();
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const Expr& t = *terms[i];
    auto note = [&](FactorSide side, const ExprPtr& f) {
      auto [it, fresh] = seen.try_emplace(factor_tag(side, f), FactorChoice{side, f, {}});
      if (it->second.terms.empty() || it->second.terms.back() != i) it->second.terms.push_back(i);
    };
    if (t.op() == ExprOp::MulN) {
      for (const auto& f : t.children()) note(FactorSide::Elementwise, f);
    } else if (t.op() == ExprOp::MatMul) {
      note(FactorSide::MatMulLeft, t.children()[0]);
      note(FactorSide::MatMulRight, t.children()[1]);
    }
  }
  std::optional<FactorChoice> best;
  for (auto& [tag, choice] : seen) {
    if (choice.terms.size() < 2) continue;
    if (!best || choice.terms.size() > best->terms.size()) best = choice;
  }
  return best;
}

ExprPtr remove_factor(const Expr& term, const FactorChoice& choice) {
  if (choice.side == FactorSide::MatMulLeft) return term.children()[1];
  if (choice.side == FactorSide::MatMulRight) return term.children()[0];
  std::vector<ExprPtr> rest;
  bool removed = false;
  for (const auto& c : term.children()) {
    if (!removed && c->key() == choice.factor->key()) {
      removed = true;
      continue;
    }
    rest.push_back(c);
  }
  return rest.size() == 1 ? rest.front() : Expr::mul(std::move(rest));
}

class Factorizer {
 public:
  ExprPtr run(const ExprPtr& e) {
    if (e->is_leaf()) return e;
    if (auto it = memo_.find(e.get()); it != memo_.end()) return it->second.second;
    std::vector<ExprPtr> kids;
    for (const auto& c : e->children()) kids.push_back(run(c));
    ExprPtr cur = canon_.run(Expr::with_children(*e, std::move(kids)));
    while (cur->op() == ExprOp::AddN) {
      auto choice = most_common_factor(*cur);
      if (!choice) break;
      std::vector<ExprPtr> remainders, others;
      std::size_t next = 0;
      for (std::size_t i = 0; i < cur->children().size(); ++i) {
        if (next < choice->terms.size() && choice->terms[next] == i) {
          remainders.push_back(remove_factor(*cur->children()[i], *choice));
          ++next;
        } else {
          others.push_back(cur->children()[i]);
        }
      }
      ExprPtr inner = run(canon_.run(Expr::add(std::move(remainders))));
      ExprPtr merged;
      switch (choice->side) {
        case FactorSide::Elementwise:
          merged = Expr::mul({choice->factor, inner});
          break;
        case FactorSide::MatMulLeft:
          merged = Expr::matmul(choice->factor, inner);
          break;
        case FactorSide::MatMulRight:
          merged = Expr::matmul(inner, choice->factor);
          break;
      }
      merged = canon_.run(merged);
      if (others.empty()) {
        cur = merged;
      } else {
        others.push_back(merged);
        cur = canon_.run(Expr::add(std::move(others)));
      }
    }
    memo_.emplace(e.get(), std::make_pair(e, cur));
    return cur;
  }

 private:
  Canonicalizer canon_;
  // Holds the source alive so its address cannot be reused by a temporary.
  std::unordered_map<const Expr*, std::pair<ExprPtr, ExprPtr>> memo_;
};

}  // namespace

ExprPtr canonicalize(const ExprPtr& e) { return Canonicalizer{}.run(e); }

ExprPtr apply_distributive_factor(const ExprPtr& e) {
  return Factorizer{}.run(canonicalize(e));
}

}  // namespace fusenas::fusion
