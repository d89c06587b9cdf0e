#include "eat/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "eat/errors.hpp"

namespace eat {
namespace {

kernels::MatrixView view(const Tensor& t) { return {t.data(), t.rows(), t.cols()}; }

Tensor gaussian_tensor(std::vector<std::size_t> shape, double stddev, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> normal(0.0, stddev);
  for (auto& v : t.data()) v = normal(rng);
  return t;
}

// Head-averaged softmax over columns [0, width) of each head's logits.
std::vector<double> averaged_probs(std::span<const Tensor> head_logits, std::size_t width) {
  std::vector<double> avg(width, 0.0);
  std::vector<double> p(width);
  for (const auto& l : head_logits) {
    softmax_into(l.data().first(width), p);
    for (std::size_t c = 0; c < width; ++c) avg[c] += p[c];
  }
  for (auto& v : avg) v /= static_cast<double>(head_logits.size());
  return avg;
}

}  // namespace

void Architecture::validate() const {
  if (input_dim == 0 || hidden_dim == 0) throw ConfigError("layer widths must be positive");
  if (num_classes == 0) throw ConfigError("num_classes must be positive");
  if (num_heads == 0) throw ConfigError("at least one classifier head is required");
}

std::vector<Tensor*> ModelParams::extractor_tensors() { return {&w1, &b1, &w2, &b2}; }
std::vector<const Tensor*> ModelParams::extractor_tensors() const { return {&w1, &b1, &w2, &b2}; }

std::vector<Tensor*> ModelParams::head_tensors() {
  std::vector<Tensor*> out;
  for (auto& h : heads) {
    out.push_back(&h.weight);
    out.push_back(&h.bias);
  }
  return out;
}

std::vector<const Tensor*> ModelParams::head_tensors() const {
  std::vector<const Tensor*> out;
  for (const auto& h : heads) {
    out.push_back(&h.weight);
    out.push_back(&h.bias);
  }
  return out;
}

std::vector<Tensor*> ModelParams::tensors() {
  auto out = extractor_tensors();
  for (auto* t : head_tensors()) out.push_back(t);
  return out;
}

std::vector<const Tensor*> ModelParams::tensors() const {
  auto out = extractor_tensors();
  for (const auto* t : head_tensors()) out.push_back(t);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto* t : tensors()) n += t->size();
  return n;
}

void ModelParams::zero_grad() {
  for (auto* t : tensors()) {
    t->ensure_grad();
    t->zero_grad();
  }
}

bool ModelParams::operator==(const ModelParams& other) const {
  if (!(arch == other.arch)) return false;
  const auto a = tensors();
  const auto b = other.tensors();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(*a[i] == *b[i])) return false;
  }
  return true;
}

ModelParams init_params(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  ModelParams p;
  p.arch = arch;
  const std::size_t d = arch.input_dim;
  const std::size_t h = arch.hidden_dim;
  const std::size_t K = arch.logit_count();
  std::mt19937_64 rng(seed);
  p.w1 = gaussian_tensor({d, h}, std::sqrt(2.0 / static_cast<double>(d)), rng);
  p.b1 = Tensor({h});
  p.w2 = gaussian_tensor({h, h}, std::sqrt(2.0 / static_cast<double>(h)), rng);
  p.b2 = Tensor({h});
  for (std::size_t i = 0; i < arch.num_heads; ++i) {
    std::mt19937_64 head_rng(seed ^ (0x9e3779b97f4a7c15ULL * (i + 1)));
    Head head;
    head.weight = gaussian_tensor({h, K}, std::sqrt(1.0 / static_cast<double>(h)), head_rng);
    head.bias = Tensor({K});
    p.heads.push_back(std::move(head));
  }
  return p;
}

ModelParams zero_params(const Architecture& arch) {
  ModelParams p = init_params(arch, 0);
  for (auto* t : p.tensors()) std::fill(t->data().begin(), t->data().end(), 0.0);
  return p;
}

Tensor flatten(const ModelParams& params) {
  std::vector<double> flat;
  flat.reserve(params.parameter_count());
  for (const auto* t : params.tensors()) flat.insert(flat.end(), t->data().begin(), t->data().end());
  return Tensor::vector(std::move(flat));
}

void unflatten(ModelParams& params, const Tensor& flat) {
  if (flat.size() != params.parameter_count()) {
    throw ContractViolation("unflatten: parameter count mismatch");
  }
  std::size_t offset = 0;
  for (auto* t : params.tensors()) {
    std::copy_n(flat.data().begin() + static_cast<std::ptrdiff_t>(offset), t->size(),
                t->data().begin());
    offset += t->size();
  }
}

Tensor flatten_grad(const ModelParams& params) {
  std::vector<double> flat;
  flat.reserve(params.parameter_count());
  for (const auto* t : params.tensors()) {
    if (t->has_grad()) {
      flat.insert(flat.end(), t->grad().begin(), t->grad().end());
    } else {
      flat.insert(flat.end(), t->size(), 0.0);
    }
  }
  return Tensor::vector(std::move(flat));
}

Tensor flatten_extractor(const ModelParams& params) {
  std::vector<double> flat;
  for (const auto* t : params.extractor_tensors()) {
    flat.insert(flat.end(), t->data().begin(), t->data().end());
  }
  return Tensor::vector(std::move(flat));
}

std::vector<Tensor> forward_batch(const ModelParams& params, const Tensor& inputs,
                                  kernels::Execution exec) {
  const auto& a = params.arch;
  if (inputs.cols() != a.input_dim) {
    throw ContractViolation("forward: input dimension " + std::to_string(inputs.cols()) +
                            " does not match model input " + std::to_string(a.input_dim));
  }
  const std::size_t n = inputs.rows();
  Tensor h1({n, a.hidden_dim});
  kernels::affine(exec, view(inputs), view(params.w1), params.b1.data(), h1.data());
  kernels::relu(exec, h1.data(), h1.data());
  Tensor h2({n, a.hidden_dim});
  kernels::affine(exec, view(h1), view(params.w2), params.b2.data(), h2.data());
  kernels::relu(exec, h2.data(), h2.data());
  std::vector<Tensor> out;
  out.reserve(params.heads.size());
  for (const auto& head : params.heads) {
    Tensor logits({n, a.logit_count()});
    kernels::affine(exec, view(h2), view(head.weight), head.bias.data(), logits.data());
    out.push_back(std::move(logits));
  }
  return out;
}

std::vector<Tensor> forward(const ModelParams& params, std::span<const double> x) {
  auto batch = forward_batch(params, Tensor::matrix(1, x.size(), {x.begin(), x.end()}));
  for (auto& t : batch) t = Tensor::vector(t.values());
  return batch;
}

GraphForward forward_graph(Graph& graph, ModelParams& params, const Tensor& inputs,
                           bool train_extractor) {
  if (inputs.cols() != params.arch.input_dim) {
    throw ContractViolation("forward: input dimension does not match model");
  }
  GraphForward out;
  if (train_extractor) {
    auto x = graph.constant(inputs);
    auto h1 = graph.relu(graph.add_bias(graph.matmul(x, graph.leaf(params.w1)), graph.leaf(params.b1)));
    out.features =
        graph.relu(graph.add_bias(graph.matmul(h1, graph.leaf(params.w2)), graph.leaf(params.b2)));
  } else {
    const auto& a = params.arch;
    Tensor h1({inputs.rows(), a.hidden_dim});
    kernels::serial::affine(view(inputs), view(params.w1), params.b1.data(), h1.data());
    kernels::serial::relu(h1.data(), h1.data());
    Tensor h2({inputs.rows(), a.hidden_dim});
    kernels::serial::affine(view(h1), view(params.w2), params.b2.data(), h2.data());
    kernels::serial::relu(h2.data(), h2.data());
    out.features = graph.constant(std::move(h2));
  }
  for (auto& head : params.heads) {
    out.logits.push_back(
        graph.add_bias(graph.matmul(out.features, graph.leaf(head.weight)), graph.leaf(head.bias)));
  }
  return out;
}

double ood_score_from_logits(std::span<const Tensor> head_logits, std::size_t num_classes) {
  double g = 0.0;
  for (const auto& l : head_logits) {
    const auto p = softmax(Tensor::vector(l.values()));
    for (std::size_t j = num_classes; j < p.size(); ++j) g += p[j];
  }
  g /= static_cast<double>(head_logits.size());
  return std::clamp(g, 0.0, 1.0);
}

std::size_t predict_from_logits(std::span<const Tensor> head_logits, std::size_t num_classes) {
  const std::size_t width = head_logits.front().size();
  const auto avg = averaged_probs(head_logits, width);
  std::size_t best = 0;
  for (std::size_t c = 1; c < num_classes; ++c) {
    if (avg[c] > avg[best]) best = c;
  }
  return best;
}

double msp_from_logits(std::span<const Tensor> head_logits, std::size_t num_classes) {
  const auto avg = averaged_probs(head_logits, num_classes);
  return 1.0 - *std::max_element(avg.begin(), avg.end());
}

double ood_score(const ModelParams& params, std::span<const double> x) {
  return ood_score_from_logits(forward(params, x), params.arch.num_classes);
}

std::size_t predict_inlier(const ModelParams& params, std::span<const double> x) {
  return predict_from_logits(forward(params, x), params.arch.num_classes);
}

double msp_score(const ModelParams& params, std::span<const double> x) {
  return msp_from_logits(forward(params, x), params.arch.num_classes);
}

Detector parse_detector(const std::string& text) {
  if (text == "ensemble") return Detector::ensemble;
  if (text == "msp") return Detector::msp;
  throw ConfigError("unknown detector '" + text + "'");
}

std::string to_string(Detector detector) {
  return detector == Detector::ensemble ? "ensemble" : "msp";
}

std::vector<ScoreRecord> score_samples(const ModelParams& params, const SampleSet& samples,
                                       bool is_ood, Detector detector, kernels::Execution exec) {
  if (samples.empty()) return {};
  if (detector == Detector::ensemble && params.arch.num_abstention == 0) {
    throw ConfigError("the ensemble abstention score needs k >= 1; use the msp detector");
  }
  const auto logits = forward_batch(params, samples.matrix(), exec);
  const std::size_t C = params.arch.num_classes;
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
  std::vector<ScoreRecord> records(samples.size());
  auto score_row = [&](std::size_t i) {
    std::vector<Tensor> rows;
    rows.reserve(logits.size());
    for (const auto& l : logits) {
      rows.push_back(Tensor::vector({l.row(i).begin(), l.row(i).end()}));
    }
    ScoreRecord r;
    r.id = samples.ids[i];
    r.is_ood = is_ood;
    r.score = detector == Detector::ensemble ? ood_score_from_logits(rows, C)
                                             : msp_from_logits(rows, C);
    if (!is_ood) {
      r.predicted = static_cast<int>(predict_from_logits(rows, C));
      r.true_class = samples.labels[i];
    }
    records[i] = r;
  };
  if (exec == kernels::Execution::parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) score_row(static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) score_row(static_cast<std::size_t>(i));
  }
  return records;
}

std::string checkpoint_to_string(const ModelParams& params) {
  std::ostringstream out;
  const auto& a = params.arch;
  out << "eat-checkpoint 1\n";
  out << "arch " << a.input_dim << ' ' << a.hidden_dim << ' ' << a.num_classes << ' '
      << a.num_abstention << ' ' << a.num_heads << '\n';
  std::vector<std::string> names = {"w1", "b1", "w2", "b2"};
  for (std::size_t i = 0; i < params.heads.size(); ++i) {
    names.push_back("head" + std::to_string(i) + ".weight");
    names.push_back("head" + std::to_string(i) + ".bias");
  }
  const auto ts = params.tensors();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    out << "tensor " << names[i] << ' ' << ts[i]->rank();
    for (auto d : ts[i]->shape()) out << ' ' << d;
    out << '\n';
    for (double v : ts[i]->data()) out << format_double(v) << '\n';
  }
  return out.str();
}

ModelParams checkpoint_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> std::string& {
    if (!std::getline(in, line)) throw ParseError("unexpected end of checkpoint", line_no + 1);
    ++line_no;
    return line;
  };
  if (next() != "eat-checkpoint 1") throw ParseError("not an eat-checkpoint v1 file", line_no);
  Architecture arch;
  {
    std::istringstream fields(next());
    std::string tag;
    fields >> tag >> arch.input_dim >> arch.hidden_dim >> arch.num_classes >>
        arch.num_abstention >> arch.num_heads;
    if (tag != "arch" || !fields) throw ParseError("malformed arch line", line_no);
  }
  try {
    arch.validate();
  } catch (const ConfigError& e) {
    throw ParseError(e.what(), line_no);
  }
  ModelParams params = zero_params(arch);
  for (auto* t : params.tensors()) {
    std::istringstream fields(next());
    std::string tag, name;
    std::size_t rank = 0;
    fields >> tag >> name >> rank;
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) fields >> d;
    if (tag != "tensor" || !fields) throw ParseError("malformed tensor header", line_no);
    if (shape != t->shape()) {
      throw ParseError("tensor '" + name + "' shape does not match the architecture", line_no);
    }
    for (auto& v : t->data()) {
      const std::string& cell = next();
      char* end = nullptr;
      v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size()) {
        throw ParseError("non-numeric weight '" + cell + "'", line_no);
      }
    }
  }
  return params;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << checkpoint_to_string(params);
  if (!out) throw IoError("failed writing " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_string(buf.str());
}

}  // namespace eat
