#include <fstream>
#include <sstream>

#include "synthlabel/error.hpp"
#include "synthlabel/hashing.hpp"
#include "synthlabel/kv.hpp"
#include "synthlabel/tnsr_io.hpp"
#include "synthlabel/wrappers.hpp"

namespace synthlabel {

std::string_view to_string(WrapperKind kind) {
  switch (kind) {
    case WrapperKind::svm: return "svm";
    case WrapperKind::knn: return "knn";
    case WrapperKind::logreg: return "logreg";
  }
  return "unknown";
}

WrapperKind parse_wrapper_kind(std::string_view text) {
  if (text == "svm") return WrapperKind::svm;
  if (text == "knn") return WrapperKind::knn;
  if (text == "logreg") return WrapperKind::logreg;
  throw ConfigError("unknown wrapper '" + std::string(text) + "' (expected svm, knn or logreg)");
}

WrapperKind kind_of(const WrapperModel& model) {
  return static_cast<WrapperKind>(model.index());
}

std::size_t embedding_dim(const WrapperModel& model) {
  struct {
    std::size_t operator()(const SvmModel& m) const { return m.support_vectors.dim(1); }
    std::size_t operator()(const KnnModel& m) const { return m.points.dim(1); }
    std::size_t operator()(const LogRegModel& m) const { return m.weights.size(); }
  } visitor;
  return std::visit(visitor, model);
}

namespace {

Tensor labels_tensor(const std::vector<int>& labels) {
  std::vector<double> v(labels.begin(), labels.end());
  return Tensor({labels.size()}, std::move(v));
}

std::vector<int> labels_from(const Tensor& t) {
  std::vector<int> out;
  for (double v : t.data()) out.push_back(static_cast<int>(v));
  return out;
}

void write_tensors(std::ostream& out, const std::vector<const Tensor*>& tensors) {
  write_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const Tensor* t : tensors) write_tnsr(out, *t);
}

std::vector<Tensor> read_tensors(std::istream& in, std::size_t expected) {
  const auto count = read_u32(in);
  if (count != expected) {
    throw IoError("wrapper file holds " + std::to_string(count) + " tensors, expected " +
                  std::to_string(expected));
  }
  std::vector<Tensor> out;
  for (std::uint32_t i = 0; i < count; ++i) out.push_back(read_tnsr(in));
  return out;
}

}  // namespace

void write_wrapper(std::ostream& out, const WrapperModel& model) {
  write_blob(out, std::string(to_string(kind_of(model))));
  KeyValues kv;
  if (const auto* svm = std::get_if<SvmModel>(&model)) {
    kv.set("bias", svm->bias);
    kv.set("gamma", svm->gamma);
    kv.set("c", svm->c);
    write_blob(out, kv.canonical_text());
    const Tensor alphas({svm->alphas.size()}, svm->alphas);
    const Tensor labels = labels_tensor(svm->labels);
    write_tensors(out, {&svm->support_vectors, &alphas, &labels});
  } else if (const auto* knn = std::get_if<KnnModel>(&model)) {
    kv.set("k", std::uint64_t{knn->k});
    write_blob(out, kv.canonical_text());
    const Tensor labels = labels_tensor(knn->labels);
    write_tensors(out, {&knn->points, &labels});
  } else {
    const auto& lr = std::get<LogRegModel>(model);
    kv.set("bias", lr.bias);
    write_blob(out, kv.canonical_text());
    write_tensors(out, {&lr.weights});
  }
}

WrapperModel read_wrapper(std::istream& in) {
  const auto kind = parse_wrapper_kind(read_blob(in));
  const auto kv = KeyValues::parse(read_blob(in));
  switch (kind) {
    case WrapperKind::svm: {
      auto t = read_tensors(in, 3);
      SvmModel m;
      m.support_vectors = std::move(t[0]);
      m.alphas = t[1].values();
      m.labels = labels_from(t[2]);
      m.bias = kv.get_double("bias");
      m.gamma = kv.get_double("gamma");
      m.c = kv.get_double("c");
      if (m.alphas.size() != m.support_vectors.dim(0) || m.labels.size() != m.alphas.size()) {
        throw IoError("SVM file: inconsistent support vector counts");
      }
      return m;
    }
    case WrapperKind::knn: {
      auto t = read_tensors(in, 2);
      KnnModel m{std::move(t[0]), labels_from(t[1]), kv.get_u64("k")};
      if (m.labels.size() != m.points.dim(0)) throw IoError("kNN file: inconsistent point counts");
      return m;
    }
    case WrapperKind::logreg: {
      auto t = read_tensors(in, 1);
      LogRegModel m;
      m.weights = std::move(t[0]);
      m.bias = kv.get_double("bias");
      return m;
    }
  }
  throw IoError("unreachable wrapper kind");
}

void save_wrapper(const std::filesystem::path& path, const WrapperModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_wrapper(out, model);
}

WrapperModel load_wrapper(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_wrapper(in);
}

std::string wrapper_hash(const WrapperModel& model) {
  std::ostringstream out;
  write_wrapper(out, model);
  return short_hash(out.str());
}

}  // namespace synthlabel
