#pragma once

#include <functional>
#include <memory>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace layoutmrc::ag {

using Mat = Eigen::MatrixXd;

// One node of the computation tape. Values are computed eagerly at op
// construction; backward closures pull this node's grad into its parents.
struct Node {
  Mat val;
  Mat grad;
  std::function<void()> back;
};

// Reverse-mode tape over dense matrices. Nodes are created in evaluation
// order, so a single reverse sweep is a valid topological order.
class Tape {
 public:
  Node* leaf(Mat v);
  Node* constant(Mat v) { return leaf(std::move(v)); }

  Node* add(Node* a, Node* b);
  Node* add_rowvec(Node* a, Node* b);   // b: 1xC, broadcast over rows of a
  Node* add_const(Node* a, const Mat& c);
  Node* mul_const(Node* a, const Mat& c);  // elementwise
  Node* scale(Node* a, double c);
  Node* add_scaled(Node* a, Node* b, double c);  // a + c*b
  Node* matmul(Node* a, Node* b);
  Node* transpose(Node* a);
  Node* relu(Node* a);
  Node* sigmoid(Node* a);
  Node* col_slice(Node* a, int start, int n);
  Node* col_concat(const std::vector<Node*>& parts);
  Node* softmax_rows(Node* scores);
  Node* layer_norm_rows(Node* x, Node* gain, Node* bias, double eps);
  Node* gather_rows(Node* table, std::vector<int> ids);
  // Relative-position attention bias: out(i,j) = row(0, clamp(j-i+k, 0, 2k)).
  Node* relpos_bias(Node* row, int rows, int cols, int max_rel);
  // Inverted dropout; identity when p == 0.
  Node* dropout(Node* a, double p, std::mt19937& rng);

  // Mean token-level cross-entropy of row-wise softmax vs. target ids.
  Node* softmax_xent(Node* logits, std::vector<int> targets);
  // Mean binary cross-entropy with logits (numerically stable); targets may
  // be smoothed values in [0,1].
  Node* bce_logits(Node* logits, Eigen::VectorXd targets);

  // Seeds root (1x1) with grad 1 and runs the reverse sweep.
  void backward(Node* root);

  std::size_t size() const { return nodes_.size(); }

 private:
  Node* make(Mat v);
  std::vector<std::unique_ptr<Node>> nodes_;
};

}  // namespace layoutmrc::ag
