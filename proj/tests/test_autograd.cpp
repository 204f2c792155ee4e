#include <doctest.h>

#include <functional>
#include <random>

#include "layoutmrc/autograd.hpp"

using namespace layoutmrc;
using ag::Mat;

namespace {

Mat random_mat(int r, int c, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Mat m(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) m(i, j) = d(rng);
  }
  return m;
}

// Central finite differences of a scalar-valued graph wrt every entry of
// every input, compared against the tape's analytic gradients.
void check_grads(std::vector<Mat> inputs,
                 const std::function<ag::Node*(ag::Tape&, std::vector<ag::Node*>&)>& build,
                 double tol = 1e-6, double h = 1e-6) {
  ag::Tape tape;
  std::vector<ag::Node*> leaves;
  for (auto& m : inputs) leaves.push_back(tape.leaf(m));
  ag::Node* out = build(tape, leaves);
  tape.backward(out);

  for (std::size_t v = 0; v < inputs.size(); ++v) {
    for (Eigen::Index i = 0; i < inputs[v].rows(); ++i) {
      for (Eigen::Index j = 0; j < inputs[v].cols(); ++j) {
        auto eval = [&](double delta) {
          std::vector<Mat> shifted = inputs;
          shifted[v](i, j) += delta;
          ag::Tape t2;
          std::vector<ag::Node*> l2;
          for (auto& m : shifted) l2.push_back(t2.leaf(m));
          return build(t2, l2)->val(0, 0);
        };
        double fd = (eval(h) - eval(-h)) / (2 * h);
        double an = leaves[v]->grad(i, j);
        CHECK(an == doctest::Approx(fd).epsilon(tol).scale(1.0));
      }
    }
  }
}

// Scalar readout that mixes all entries with fixed weights.
ag::Node* weigh(ag::Tape& t, ag::Node* x) {
  Mat w = random_mat(static_cast<int>(x->val.rows()),
                     static_cast<int>(x->val.cols()), 99);
  ag::Node* prod = t.mul_const(x, w);
  // sum all entries via two matmuls with ones
  Mat ones_r = Mat::Ones(1, prod->val.rows());
  Mat ones_c = Mat::Ones(prod->val.cols(), 1);
  return t.matmul(t.matmul(t.constant(ones_r), prod), t.constant(ones_c));
}

}  // namespace

TEST_CASE("matmul/add/relu/sigmoid gradients match finite differences") {
  check_grads({random_mat(3, 4, 1), random_mat(4, 2, 2)},
              [](ag::Tape& t, std::vector<ag::Node*>& l) {
                return weigh(t, t.relu(t.matmul(l[0], l[1])));
              });
  check_grads({random_mat(3, 4, 3), random_mat(3, 4, 4)},
              [](ag::Tape& t, std::vector<ag::Node*>& l) {
                return weigh(t, t.sigmoid(t.add(l[0], l[1])));
              });
  check_grads({random_mat(3, 4, 5), random_mat(1, 4, 6)},
              [](ag::Tape& t, std::vector<ag::Node*>& l) {
                return weigh(t, t.add_rowvec(l[0], l[1]));
              });
}

TEST_CASE("softmax rows sum to one and backprop correctly") {
  ag::Tape t;
  ag::Node* s = t.softmax_rows(t.leaf(random_mat(5, 7, 10)));
  for (int i = 0; i < 5; ++i) {
    CHECK(s->val.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
  check_grads({random_mat(3, 5, 11)},
              [](ag::Tape& t2, std::vector<ag::Node*>& l) {
                return weigh(t2, t2.softmax_rows(l[0]));
              });
}

TEST_CASE("layer norm gradients match finite differences") {
  check_grads({random_mat(4, 6, 20), random_mat(1, 6, 21), random_mat(1, 6, 22)},
              [](ag::Tape& t, std::vector<ag::Node*>& l) {
                return weigh(t, t.layer_norm_rows(l[0], l[1], l[2], 1e-5));
              },
              1e-5);
}

TEST_CASE("gather/slice/concat/transpose gradients") {
  check_grads({random_mat(6, 4, 30)},
              [](ag::Tape& t, std::vector<ag::Node*>& l) {
                return weigh(t, t.gather_rows(l[0], {0, 3, 3, 5}));
              });
  check_grads({random_mat(3, 8, 31)},
              [](ag::Tape& t, std::vector<ag::Node*>& l) {
                auto a = t.col_slice(l[0], 0, 4);
                auto b = t.col_slice(l[0], 4, 4);
                return weigh(t, t.col_concat({b, t.transpose(t.transpose(a))}));
              });
}

TEST_CASE("relative position bias gradients") {
  check_grads({random_mat(1, 9, 40)},
              [](ag::Tape& t, std::vector<ag::Node*>& l) {
                return weigh(t, t.relpos_bias(l[0], 5, 6, 4));
              });
}

TEST_CASE("softmax cross-entropy value and gradient") {
  // uniform logits over V classes -> loss = ln V
  ag::Tape t;
  ag::Node* l = t.leaf(Mat::Zero(3, 100));
  CHECK(t.softmax_xent(l, {0, 5, 99})->val(0, 0) ==
        doctest::Approx(std::log(100.0)).epsilon(1e-12));

  check_grads({random_mat(4, 6, 50)},
              [](ag::Tape& t2, std::vector<ag::Node*>& leaves) {
                return t2.softmax_xent(leaves[0], {1, 0, 5, 2});
              });
}

TEST_CASE("bce with logits value and gradient") {
  // sigmoid(0) = 0.5 -> loss = ln 2 for any target
  ag::Tape t;
  Eigen::VectorXd targets(3);
  targets << 1.0, 0.0, 0.9;
  CHECK(t.bce_logits(t.leaf(Mat::Zero(3, 1)), targets)->val(0, 0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  check_grads({random_mat(5, 1, 60)},
              [](ag::Tape& t2, std::vector<ag::Node*>& leaves) {
                Eigen::VectorXd s(5);
                s << 0, 1, 0.9, 0.3, 0;
                return t2.bce_logits(leaves[0], s);
              });
}

TEST_CASE("add_scaled composes losses additively") {
  check_grads({random_mat(1, 1, 70), random_mat(1, 1, 71)},
              [](ag::Tape& t, std::vector<ag::Node*>& l) {
                return t.add_scaled(l[0], l[1], 2.5);
              });
}

TEST_CASE("dropout is identity at p=0 and scales kept entries") {
  ag::Tape t;
  std::mt19937 rng(0);
  ag::Node* x = t.leaf(Mat::Ones(10, 10));
  CHECK(t.dropout(x, 0.0, rng) == x);
  ag::Node* d = t.dropout(x, 0.5, rng);
  int kept = 0;
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      if (d->val(i, j) != 0.0) {
        CHECK(d->val(i, j) == doctest::Approx(2.0));
        ++kept;
      }
    }
  }
  CHECK(kept > 20);
  CHECK(kept < 80);
}
