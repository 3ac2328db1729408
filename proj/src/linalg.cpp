#include "cacq/linalg.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace cacq {

std::vector<std::vector<int>> strongly_connected_components(const Digraph& graph) {
  const int n = static_cast<int>(graph.size());
  std::vector<int> index(n, -1), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<int> stack;
  std::vector<std::vector<int>> components;
  int counter = 0;

  // Explicit call stack: (node, next edge position).
  std::vector<std::pair<int, std::size_t>> frames;
  for (int root = 0; root < n; ++root) {
    if (index[root] >= 0) continue;
    frames.emplace_back(root, 0);
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!frames.empty()) {
      auto& [v, pos] = frames.back();
      if (pos < graph[v].size()) {
        const int w = graph[v][pos++];
        if (index[w] < 0) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          frames.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      const int done = v;
      frames.pop_back();
      if (!frames.empty()) {
        const int parent = frames.back().first;
        low[parent] = std::min(low[parent], low[done]);
      }
      if (low[done] == index[done]) {
        std::vector<int> comp;
        int w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp.push_back(w);
        } while (w != done);
        std::sort(comp.begin(), comp.end());
        components.push_back(std::move(comp));
      }
    }
  }
  return components;
}

std::vector<std::vector<int>> closed_classes(const Digraph& graph) {
  auto comps = strongly_connected_components(graph);
  std::vector<int> owner(graph.size(), -1);
  for (std::size_t k = 0; k < comps.size(); ++k)
    for (int v : comps[k]) owner[v] = static_cast<int>(k);
  std::vector<std::vector<int>> closed;
  for (std::size_t k = 0; k < comps.size(); ++k) {
    bool leaves = false;
    for (int v : comps[k]) {
      for (int w : graph[v]) {
        if (owner[w] != static_cast<int>(k)) {
          leaves = true;
          break;
        }
      }
      if (leaves) break;
    }
    if (!leaves) closed.push_back(comps[k]);
  }
  std::sort(closed.begin(), closed.end());
  return closed;
}

std::vector<bool> reachable_from(const Digraph& graph, int start) {
  std::vector<bool> seen(graph.size(), false);
  if (graph.empty()) return seen;
  std::vector<int> todo{start};
  seen[start] = true;
  while (!todo.empty()) {
    const int v = todo.back();
    todo.pop_back();
    for (int w : graph[v]) {
      if (!seen[w]) {
        seen[w] = true;
        todo.push_back(w);
      }
    }
  }
  return seen;
}

Digraph support_graph(const Matrix& m) {
  Digraph g(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (i != j && m(i, j) != 0.0) g[i].push_back(static_cast<int>(j));
  return g;
}

std::string format_class(const std::vector<int>& members, std::size_t max_shown) {
  std::ostringstream out;
  out << '{';
  for (std::size_t i = 0; i < members.size() && i < max_shown; ++i) {
    if (i) out << ',';
    out << members[i];
  }
  if (members.size() > max_shown) out << ",... (" << members.size() << " states)";
  out << '}';
  return out.str();
}

Vector gth_stationary(const Matrix& m) {
  const Eigen::Index n = m.rows();
  if (n == 0) throw std::invalid_argument("gth_stationary: empty matrix");
  if (m.cols() != n) throw std::invalid_argument("gth_stationary: matrix not square");

  const auto closed = closed_classes(support_graph(m));
  if (closed.size() != 1) {
    std::string msg = "chain has " + std::to_string(closed.size()) +
                      " recurrent classes, e.g. " + format_class(closed[0]) +
                      " and " + format_class(closed[1]);
    throw ReducibleChainError(msg, closed);
  }
  const auto& members = closed.front();
  const auto k = static_cast<Eigen::Index>(members.size());

  Matrix a(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      a(i, j) = (i == j) ? 0.0 : m(members[i], members[j]);

  for (Eigen::Index last = k - 1; last > 0; --last) {
    double out = 0.0;
    for (Eigen::Index j = 0; j < last; ++j) out += a(last, j);
    // Irreducible on the class, so out > 0.
    for (Eigen::Index i = 0; i < last; ++i) a(i, last) /= out;
    for (Eigen::Index i = 0; i < last; ++i) {
      const double f = a(i, last);
      if (f == 0.0) continue;
      for (Eigen::Index j = 0; j < last; ++j) {
        if (j != i) a(i, j) += f * a(last, j);
      }
    }
  }
  Vector local(k);
  local(0) = 1.0;
  for (Eigen::Index j = 1; j < k; ++j) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < j; ++i) v += local(i) * a(i, j);
    local(j) = v;
  }
  local /= local.sum();

  Vector pi = Vector::Zero(n);
  for (Eigen::Index i = 0; i < k; ++i) pi(members[i]) = local(i);
  return pi;
}

void Fingerprint::add_bytes(const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    state_ ^= p[i];
    state_ *= 1099511628211ULL;
  }
}

void Fingerprint::add(std::string_view text) {
  add(static_cast<std::int64_t>(text.size()));
  add_bytes(text.data(), text.size());
}

void Fingerprint::add(std::span<const double> values) {
  add(static_cast<std::int64_t>(values.size()));
  add_bytes(values.data(), values.size_bytes());
}

void Fingerprint::add(const Matrix& m) {
  add(static_cast<std::int64_t>(m.rows()));
  add(static_cast<std::int64_t>(m.cols()));
  add_bytes(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

std::string Fingerprint::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
  return buf;
}

}  // namespace cacq
