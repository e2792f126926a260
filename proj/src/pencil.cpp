#include "iossnet/pencil.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace iossnet {

namespace {

void require_symmetric(const Matrix& m, const std::string& what) {
  if (m.rows() != m.cols()) throw SpecificationError(what + " is not square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw SpecificationError(what + " is not symmetric");
  }
}

}  // namespace

Matrix PencilBlock::evaluate(const Vector& theta) const {
  Matrix out = constant;
  for (const auto& [k, coeff] : terms) out.noalias() += theta[k] * coeff;
  return out;
}

bool PencilBlock::is_constant() const { return terms.empty(); }

void AffineMatrixPencil::add_block(PencilBlock block) {
  const std::string name = block.label.empty() ? "block " + std::to_string(blocks_.size()) : block.label;
  require_symmetric(block.constant, name + " constant");
  block.constant = 0.5 * (block.constant + block.constant.transpose());
  std::vector<std::pair<Index, Matrix>> kept;
  for (auto& [k, coeff] : block.terms) {
    if (k < 0 || k >= var_count_) throw SpecificationError(name + " references variable out of range");
    if (coeff.rows() != block.constant.rows() || coeff.cols() != block.constant.cols()) {
      throw SpecificationError(name + " has a coefficient of the wrong size");
    }
    require_symmetric(coeff, name + " coefficient");
    if (coeff.cwiseAbs().maxCoeff() == 0.0) continue;
    kept.emplace_back(k, 0.5 * (coeff + coeff.transpose()));
  }
  block.terms = std::move(kept);
  blocks_.push_back(std::move(block));
}

void AffineMatrixPencil::set_objective(Vector c) {
  if (c.size() != var_count_) throw SpecificationError("objective has wrong length");
  objective_ = std::move(c);
}

Index AffineMatrixPencil::total_size() const {
  Index total = 0;
  for (const auto& b : blocks_) total += b.size();
  return total;
}

Vector AffineMatrixPencil::block_lambda_max(const Vector& theta) const {
  if (theta.size() != var_count_) throw SpecificationError("decision vector has wrong length");
  Vector out(static_cast<Index>(blocks_.size()));
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const Matrix m = blocks_[b].evaluate(theta);
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    out[static_cast<Index>(b)] = es.eigenvalues().maxCoeff();
  }
  return out;
}

double AffineMatrixPencil::lambda_max(const Vector& theta) const {
  if (blocks_.empty()) return -std::numeric_limits<double>::infinity();
  return block_lambda_max(theta).maxCoeff();
}

AffineMatrixPencil AffineMatrixPencil::with_objective_level(double level) const {
  if (!objective_) throw SpecificationError("pencil has no objective");
  AffineMatrixPencil out = *this;
  PencilBlock lvl;
  lvl.label = "objective level";
  lvl.constant = Matrix::Constant(1, 1, -level);
  for (Index k = 0; k < var_count_; ++k) {
    if ((*objective_)[k] != 0.0) lvl.terms.emplace_back(k, Matrix::Constant(1, 1, (*objective_)[k]));
  }
  out.add_block(std::move(lvl));
  return out;
}

std::string to_string(FeasibilityStatus s) {
  switch (s) {
    case FeasibilityStatus::feasible:
      return "feasible";
    case FeasibilityStatus::infeasible_certified_none:
      return "infeasible-certified-none";
    case FeasibilityStatus::inconclusive:
      return "inconclusive";
  }
  return "unknown";
}

}  // namespace iossnet
