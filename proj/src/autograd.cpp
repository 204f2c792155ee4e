#include "layoutmrc/autograd.hpp"

#include <cmath>
#include <stdexcept>

namespace layoutmrc::ag {

Node* Tape::make(Mat v) {
  auto node = std::make_unique<Node>();
  node->val = std::move(v);
  node->grad = Mat::Zero(node->val.rows(), node->val.cols());
  nodes_.push_back(std::move(node));
  return nodes_.back().get();
}

Node* Tape::leaf(Mat v) { return make(std::move(v)); }

Node* Tape::add(Node* a, Node* b) {
  Node* out = make(a->val + b->val);
  out->back = [a, b, out] {
    a->grad += out->grad;
    b->grad += out->grad;
  };
  return out;
}

Node* Tape::add_rowvec(Node* a, Node* b) {
  Node* out = make(a->val.rowwise() + b->val.row(0));
  out->back = [a, b, out] {
    a->grad += out->grad;
    b->grad.row(0) += out->grad.colwise().sum();
  };
  return out;
}

Node* Tape::add_const(Node* a, const Mat& c) {
  Node* out = make(a->val + c);
  out->back = [a, out] { a->grad += out->grad; };
  return out;
}

Node* Tape::mul_const(Node* a, const Mat& c) {
  Node* out = make(a->val.cwiseProduct(c));
  auto c_p = std::make_shared<Mat>(c);
  out->back = [a, out, c_p] { a->grad += out->grad.cwiseProduct(*c_p); };
  return out;
}

Node* Tape::scale(Node* a, double c) {
  Node* out = make(a->val * c);
  out->back = [a, out, c] { a->grad += out->grad * c; };
  return out;
}

Node* Tape::add_scaled(Node* a, Node* b, double c) {
  Node* out = make(a->val + c * b->val);
  out->back = [a, b, out, c] {
    a->grad += out->grad;
    b->grad += out->grad * c;
  };
  return out;
}

Node* Tape::matmul(Node* a, Node* b) {
  Node* out = make(a->val * b->val);
  out->back = [a, b, out] {
    a->grad += out->grad * b->val.transpose();
    b->grad += a->val.transpose() * out->grad;
  };
  return out;
}

Node* Tape::transpose(Node* a) {
  Node* out = make(a->val.transpose());
  out->back = [a, out] { a->grad += out->grad.transpose(); };
  return out;
}

Node* Tape::relu(Node* a) {
  Node* out = make(a->val.cwiseMax(0.0));
  out->back = [a, out] {
    a->grad.array() +=
        out->grad.array() * (a->val.array() > 0.0).cast<double>();
  };
  return out;
}

Node* Tape::sigmoid(Node* a) {
  Mat s = (1.0 / (1.0 + (-a->val.array()).exp())).matrix();
  Node* out = make(std::move(s));
  out->back = [a, out] {
    a->grad.array() +=
        out->grad.array() * out->val.array() * (1.0 - out->val.array());
  };
  return out;
}

Node* Tape::col_slice(Node* a, int start, int n) {
  Node* out = make(a->val.middleCols(start, n));
  out->back = [a, out, start, n] {
    a->grad.middleCols(start, n) += out->grad;
  };
  return out;
}

Node* Tape::col_concat(const std::vector<Node*>& parts) {
  Eigen::Index rows = parts.front()->val.rows();
  Eigen::Index cols = 0;
  for (Node* p : parts) cols += p->val.cols();
  Mat v(rows, cols);
  Eigen::Index off = 0;
  for (Node* p : parts) {
    v.middleCols(off, p->val.cols()) = p->val;
    off += p->val.cols();
  }
  std::vector<Node*> parents = parts;
  Node* out = make(std::move(v));
  out->back = [parents, out] {
    Eigen::Index off = 0;
    for (Node* p : parents) {
      p->grad += out->grad.middleCols(off, p->val.cols());
      off += p->val.cols();
    }
  };
  return out;
}

Node* Tape::softmax_rows(Node* scores) {
  Mat p = scores->val;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double m = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  Node* out = make(std::move(p));
  out->back = [scores, out] {
    for (Eigen::Index i = 0; i < out->val.rows(); ++i) {
      double dot = out->grad.row(i).cwiseProduct(out->val.row(i)).sum();
      scores->grad.row(i).array() +=
          (out->grad.row(i).array() - dot) * out->val.row(i).array();
    }
  };
  return out;
}

Node* Tape::layer_norm_rows(Node* x, Node* gain, Node* bias, double eps) {
  const Eigen::Index h = x->val.cols();
  Mat xhat(x->val.rows(), h);
  Eigen::VectorXd inv_std(x->val.rows());
  for (Eigen::Index i = 0; i < x->val.rows(); ++i) {
    double mu = x->val.row(i).mean();
    Eigen::RowVectorXd centered = x->val.row(i).array() - mu;
    double var = centered.squaredNorm() / static_cast<double>(h);
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = centered * inv_std(i);
  }
  Mat y = (xhat.array().rowwise() * gain->val.row(0).array()).matrix();
  y.rowwise() += bias->val.row(0);
  Node* out = make(std::move(y));
  auto xhat_p = std::make_shared<Mat>(std::move(xhat));
  auto inv_p = std::make_shared<Eigen::VectorXd>(std::move(inv_std));
  out->back = [x, gain, bias, out, xhat_p, inv_p, h] {
    for (Eigen::Index i = 0; i < out->val.rows(); ++i) {
      Eigen::RowVectorXd dy = out->grad.row(i);
      Eigen::RowVectorXd xh = xhat_p->row(i);
      gain->grad.row(0).array() += dy.array() * xh.array();
      bias->grad.row(0) += dy;
      Eigen::RowVectorXd dxhat = dy.array() * gain->val.row(0).array();
      double m1 = dxhat.mean();
      double m2 = dxhat.cwiseProduct(xh).mean();
      x->grad.row(i).array() +=
          (*inv_p)(i) * (dxhat.array() - m1 - xh.array() * m2);
    }
  };
  return out;
}

Node* Tape::gather_rows(Node* table, std::vector<int> ids) {
  Mat v(static_cast<Eigen::Index>(ids.size()), table->val.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table->val.rows()) {
      throw std::out_of_range("gather_rows: row id " + std::to_string(ids[i]) +
                              " out of range [0, " +
                              std::to_string(table->val.rows()) + ")");
    }
    v.row(static_cast<Eigen::Index>(i)) = table->val.row(ids[i]);
  }
  Node* out = make(std::move(v));
  auto ids_p = std::make_shared<std::vector<int>>(std::move(ids));
  out->back = [table, out, ids_p] {
    for (std::size_t i = 0; i < ids_p->size(); ++i) {
      table->grad.row((*ids_p)[i]) +=
          out->grad.row(static_cast<Eigen::Index>(i));
    }
  };
  return out;
}

Node* Tape::relpos_bias(Node* row, int rows, int cols, int max_rel) {
  Mat v(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      int d = std::clamp(j - i + max_rel, 0, 2 * max_rel);
      v(i, j) = row->val(0, d);
    }
  }
  Node* out = make(std::move(v));
  out->back = [row, out, rows, cols, max_rel] {
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        int d = std::clamp(j - i + max_rel, 0, 2 * max_rel);
        row->grad(0, d) += out->grad(i, j);
      }
    }
  };
  return out;
}

Node* Tape::dropout(Node* a, double p, std::mt19937& rng) {
  if (p <= 0.0) return a;
  std::bernoulli_distribution keep(1.0 - p);
  Mat mask(a->val.rows(), a->val.cols());
  const double inv_keep = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < mask.rows(); ++i) {
    for (Eigen::Index j = 0; j < mask.cols(); ++j) {
      mask(i, j) = keep(rng) ? inv_keep : 0.0;
    }
  }
  Node* out = make(a->val.cwiseProduct(mask));
  auto mask_p = std::make_shared<Mat>(std::move(mask));
  out->back = [a, out, mask_p] { a->grad += out->grad.cwiseProduct(*mask_p); };
  return out;
}

Node* Tape::softmax_xent(Node* logits, std::vector<int> targets) {
  if (static_cast<Eigen::Index>(targets.size()) != logits->val.rows()) {
    throw std::invalid_argument("softmax_xent: target count " +
                                std::to_string(targets.size()) +
                                " != logit rows " +
                                std::to_string(logits->val.rows()));
  }
  const Eigen::Index t = logits->val.rows();
  Mat probs = logits->val;
  double loss = 0;
  for (Eigen::Index i = 0; i < t; ++i) {
    double m = probs.row(i).maxCoeff();
    probs.row(i) = (probs.row(i).array() - m).exp();
    probs.row(i) /= probs.row(i).sum();
    loss -= std::log(std::max(probs(i, targets[static_cast<std::size_t>(i)]),
                              1e-300));
  }
  loss /= static_cast<double>(t);
  Node* out = make(Mat::Constant(1, 1, loss));
  auto probs_p = std::make_shared<Mat>(std::move(probs));
  auto ids_p = std::make_shared<std::vector<int>>(std::move(targets));
  out->back = [logits, out, probs_p, ids_p, t] {
    double g = out->grad(0, 0) / static_cast<double>(t);
    Mat d = *probs_p;
    for (Eigen::Index i = 0; i < t; ++i) {
      d(i, (*ids_p)[static_cast<std::size_t>(i)]) -= 1.0;
    }
    logits->grad += g * d;
  };
  return out;
}

Node* Tape::bce_logits(Node* logits, Eigen::VectorXd targets) {
  if (logits->val.cols() != 1 || logits->val.rows() != targets.size()) {
    throw std::invalid_argument("bce_logits: shape mismatch");
  }
  const Eigen::Index n = targets.size();
  double loss = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double x = logits->val(i, 0), s = targets(i);
    loss += std::max(x, 0.0) - x * s + std::log1p(std::exp(-std::abs(x)));
  }
  loss /= static_cast<double>(n);
  Node* out = make(Mat::Constant(1, 1, loss));
  auto t_p = std::make_shared<Eigen::VectorXd>(std::move(targets));
  out->back = [logits, out, t_p, n] {
    double g = out->grad(0, 0) / static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double sig = 1.0 / (1.0 + std::exp(-logits->val(i, 0)));
      logits->grad(i, 0) += g * (sig - (*t_p)(i));
    }
  };
  return out;
}

void Tape::backward(Node* root) {
  if (root->val.rows() != 1 || root->val.cols() != 1) {
    throw std::invalid_argument("backward root must be a scalar");
  }
  root->grad(0, 0) = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if ((*it)->back) (*it)->back();
  }
}

}  // namespace layoutmrc::ag
