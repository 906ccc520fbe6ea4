#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include <nlohmann/json.hpp>

#include "kbound/curation/sample.hpp"

namespace kbound::evaluation {

enum class EvalMode { kZeroShot, kFewShot, kIdkPrompting, kRefusalOnlyOod };
std::string_view to_string(EvalMode m);
EvalMode eval_mode_from_string(std::string_view s);

inline constexpr std::string_view kIdkPromptingInstruction =
    "Answer the following question based on the image. If you do not know the answer, please "
    "respond with 'I'm sorry, this question is beyond my knowledge. I don't know the answer.'";

inline constexpr std::string_view kFewShotInstruction =
    "If you do not know the answer, please respond with 'I don't know'.";

struct Demo {
  std::string question;
  std::string answer;
};

/// Known-fact demonstration followed by a refusal demonstration.
struct DemoPair {
  Demo known;
  Demo refusal;

  /// Corpus-independent exemplars used when the config supplies none.
  static DemoPair standard();
};

struct EvalSetting {
  EvalMode mode = EvalMode::kZeroShot;
  std::optional<DemoPair> demos;
  std::optional<std::string> instruction;

  /// Few-shot needs demos and an instruction; zero-shot and OOD take neither;
  /// idk-prompting takes no demos. Throws ConfigurationError otherwise.
  void validate() const;

  static EvalSetting zero_shot() { return {}; }
  static EvalSetting few_shot(DemoPair demos = DemoPair::standard());
  static EvalSetting idk_prompting();
  static EvalSetting refusal_only_ood() { return {EvalMode::kRefusalOnlyOod, std::nullopt, std::nullopt}; }
};

nlohmann::json to_json(const EvalSetting& s);
/// Few-shot and idk-prompting fall back to the standard demos and instructions.
EvalSetting eval_setting_from_json(const nlohmann::json& j);

/// zero-shot / OOD: the bare question. idk-prompting: instruction, blank
/// line, question. few-shot: instruction, known demo, refusal demo, then the
/// question, as Question/Answer blocks separated by blank lines.
std::string build_prompt(const Sample& sample, const EvalSetting& setting);

}  // namespace kbound::evaluation
