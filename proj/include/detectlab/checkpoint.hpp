#ifndef DETECTLAB_CHECKPOINT_HPP
#define DETECTLAB_CHECKPOINT_HPP

#include <filesystem>
#include <string>

#include "detectlab/gan.hpp"
#include "detectlab/scl.hpp"
#include "detectlab/supervised.hpp"

namespace detectlab {

// JSON container: {"format", "version", "kind", "tokenizer", "encoder", <heads>}.
// Parameters are stored by name with their shape; doubles round-trip exactly.
inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "detectlab-checkpoint";

enum class ModelKind { Supervised, Scl, Gan };
std::string to_string(ModelKind kind);

std::string checkpoint_json(const SupervisedDetector& detector);
std::string checkpoint_json(const StyleModel& model);
std::string checkpoint_json(const GanDetector& detector);

// Throws ParseError on malformed JSON, ValidationError on a wrong format,
// version or kind, and on parameter name/shape mismatches.
ModelKind checkpoint_kind(const std::string& json_text);
SupervisedDetector supervised_from_checkpoint(const std::string& json_text);
StyleModel style_model_from_checkpoint(const std::string& json_text);
GanDetector gan_from_checkpoint(const std::string& json_text);

std::string read_file(const std::filesystem::path& path);
// Creates parent directories. Throws IoError.
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace detectlab

#endif  // DETECTLAB_CHECKPOINT_HPP
