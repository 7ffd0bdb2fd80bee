#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lrg {

/// Base for every failure raised by the library. `category()` drives the CLI
/// exit code (I/O = 2, analysis = 3, usage = 64).
class Error : public std::runtime_error {
 public:
  enum class Category { Io, Analysis, Usage };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

class MissingFile : public Error {
 public:
  explicit MissingFile(const std::string& path)
      : Error(Category::Io, "missing file: " + path), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class MalformedLine : public Error {
 public:
  MalformedLine(const std::string& file, std::size_t line_no, const std::string& detail)
      : Error(Category::Io, file + ":" + std::to_string(line_no) + ": " + detail),
        line_no_(line_no) {}
  std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::size_t line_no_;
};

class NodeIndexOutOfRange : public Error {
 public:
  NodeIndexOutOfRange(long long node, std::size_t n_nodes)
      : Error(Category::Io, "node index " + std::to_string(node) + " outside [0, " +
                                std::to_string(n_nodes) + ")") {}
};

class EmptyGraph : public Error {
 public:
  EmptyGraph() : Error(Category::Analysis, "graph has no nodes") {}
};

class ConvergenceFailure : public Error {
 public:
  explicit ConvergenceFailure(const std::string& what) : Error(Category::Analysis, what) {}
};

class NegativeTau : public Error {
 public:
  explicit NegativeTau(double tau)
      : Error(Category::Usage, "diffusion time must be positive, got " + std::to_string(tau)) {}
};

class InvalidRange : public Error {
 public:
  explicit InvalidRange(const std::string& what) : Error(Category::Usage, what) {}
};

class NoPeak : public Error {
 public:
  NoPeak()
      : Error(Category::Analysis,
              "heat capacity has no interior peak on the grid; widen the range (--tau-max)") {}
};

class PartitionSizeMismatch : public Error {
 public:
  PartitionSizeMismatch(std::size_t partition, std::size_t nodes)
      : Error(Category::Usage, "partition covers " + std::to_string(partition) +
                                   " nodes but graph has " + std::to_string(nodes)) {}
};

class DimMismatch : public Error {
 public:
  explicit DimMismatch(const std::string& what) : Error(Category::Usage, what) {}
};

class SlotCountMismatch : public Error {
 public:
  SlotCountMismatch(std::size_t graphs, std::size_t encoders)
      : Error(Category::Usage, std::to_string(graphs) + " graphs supplied for " +
                                   std::to_string(encoders) + " encoders") {}
};

class EmptyMask : public Error {
 public:
  explicit EmptyMask(const std::string& which)
      : Error(Category::Usage, which + " mask selects no nodes") {}
};

class MisalignedTables : public Error {
 public:
  explicit MisalignedTables(const std::string& what) : Error(Category::Usage, what) {}
};

class InvalidConfig : public Error {
 public:
  explicit InvalidConfig(const std::string& what) : Error(Category::Usage, what) {}
};

}  // namespace lrg
