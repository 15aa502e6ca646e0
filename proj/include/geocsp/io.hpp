#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "geocsp/generator.hpp"
#include "geocsp/inference.hpp"
#include "geocsp/trainer.hpp"

namespace geocsp {

using Json = nlohmann::json;

/// Problem record: grid_side, variables, constraints (kind letter + argument
/// names), fixed and labels (name -> [x, y]) and metadata.
Json problem_to_json(const Problem& p);
/// Accepts kind letters or names and arguments given as names or indices.
Problem problem_from_json(const Json& j);

void write_dataset(std::ostream& os, const std::vector<Problem>& problems);
void write_dataset(const std::string& path, const std::vector<Problem>& problems);
/// One problem per line; blank lines are skipped. With `verify`, every
/// labelled record is re-solved and must agree with its labels.
std::vector<Problem> read_dataset(std::istream& is, bool verify = false);
std::vector<Problem> read_dataset(const std::string& path, bool verify = false);

Json stats_to_json(const DatasetStats& stats);

/// Config document: {"generator": {...}, "train": {...}, "inference": {...}}.
/// Missing fields keep their defaults; unknown fields are config errors.
GeneratorConfig generator_config_from_json(const Json& j);
Json generator_config_to_json(const GeneratorConfig& cfg);
TrainConfig train_config_from_json(const Json& j);
Json train_config_to_json(const TrainConfig& cfg);
InferenceConfig inference_config_from_json(const Json& j);
Json inference_config_to_json(const InferenceConfig& cfg);

Json read_json_file(const std::string& path);

enum class TensorType { F64, F32 };

struct Checkpoint {
  ModelParams params;
  Json metadata = Json::object();
  TensorType storage = TensorType::F64;
};

inline constexpr char kCheckpointMagic[8] = {'G', 'E', 'O', 'C', 'S', 'P', '1', '\0'};
inline constexpr int kCheckpointVersion = 1;

std::string checkpoint_bytes(const Checkpoint& ckpt);
Checkpoint checkpoint_from_bytes(std::string_view bytes);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Comma-separated rows with a header; doubles at 17 significant digits.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}
  void header(const std::vector<std::string>& names);
  CsvWriter& cell(double v);
  CsvWriter& cell(long long v);
  CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(std::size_t v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(std::string_view v);
  void end_row();

 private:
  void sep();
  std::ostream& os_;
  bool first_ = true;
};

std::string format_double(double v);

void write_train_report_csv(std::ostream& os, const TrainReport& report);

/// One JSON record per traced iteration.
void write_trace_jsonl(std::ostream& os, const Problem& p, const InferenceTrace& trace);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view data);

}  // namespace geocsp
