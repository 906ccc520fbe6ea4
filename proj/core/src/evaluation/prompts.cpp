#include "kbound/evaluation/prompts.hpp"

#include "kbound/errors.hpp"

namespace kbound::evaluation {

std::string_view to_string(EvalMode m) {
  switch (m) {
    case EvalMode::kZeroShot: return "zero-shot";
    case EvalMode::kFewShot: return "few-shot";
    case EvalMode::kIdkPrompting: return "idk-prompting";
    case EvalMode::kRefusalOnlyOod: return "refusal-only-ood";
  }
  return "?";
}

EvalMode eval_mode_from_string(std::string_view s) {
  for (auto m : {EvalMode::kZeroShot, EvalMode::kFewShot, EvalMode::kIdkPrompting, EvalMode::kRefusalOnlyOod}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigurationError("unknown evaluation mode: " + std::string(s));
}

DemoPair DemoPair::standard() {
  return {{"Which city is this tower located in?", "Paris"},
          {"In which year was this chapel consecrated?", "I don't know."}};
}

EvalSetting EvalSetting::few_shot(DemoPair demos) {
  return {EvalMode::kFewShot, std::move(demos), std::string(kFewShotInstruction)};
}

EvalSetting EvalSetting::idk_prompting() {
  return {EvalMode::kIdkPrompting, std::nullopt, std::string(kIdkPromptingInstruction)};
}

void EvalSetting::validate() const {
  switch (mode) {
    case EvalMode::kFewShot:
      if (!demos || !instruction || instruction->empty()) {
        throw ConfigurationError("few-shot setting needs both demos and an instruction");
      }
      break;
    case EvalMode::kZeroShot:
    case EvalMode::kRefusalOnlyOod:
      if (demos || instruction) {
        throw ConfigurationError(std::string(to_string(mode)) + " setting takes no demos or instruction");
      }
      break;
    case EvalMode::kIdkPrompting:
      if (demos) throw ConfigurationError("idk-prompting setting takes no demos");
      break;
  }
}

nlohmann::json to_json(const EvalSetting& s) {
  nlohmann::json j = {{"mode", to_string(s.mode)}};
  if (s.instruction) j["instruction"] = *s.instruction;
  if (s.demos) {
    j["demos"] = {{"known", {{"question", s.demos->known.question}, {"answer", s.demos->known.answer}}},
                  {"refusal", {{"question", s.demos->refusal.question}, {"answer", s.demos->refusal.answer}}}};
  }
  return j;
}

EvalSetting eval_setting_from_json(const nlohmann::json& j) {
  EvalSetting s;
  s.mode = eval_mode_from_string(j.value("mode", "zero-shot"));
  if (j.contains("instruction") && !j["instruction"].is_null()) s.instruction = j["instruction"].get<std::string>();
  if (j.contains("demos") && !j["demos"].is_null()) {
    const auto& d = j["demos"];
    s.demos = DemoPair{{d.at("known").at("question").get<std::string>(), d.at("known").at("answer").get<std::string>()},
                       {d.at("refusal").at("question").get<std::string>(), d.at("refusal").at("answer").get<std::string>()}};
  }
  if (s.mode == EvalMode::kFewShot) {
    if (!s.demos) s.demos = DemoPair::standard();
    if (!s.instruction) s.instruction = std::string(kFewShotInstruction);
  } else if (s.mode == EvalMode::kIdkPrompting && !s.instruction) {
    s.instruction = std::string(kIdkPromptingInstruction);
  }
  return s;
}

std::string build_prompt(const Sample& sample, const EvalSetting& setting) {
  setting.validate();
  switch (setting.mode) {
    case EvalMode::kZeroShot:
    case EvalMode::kRefusalOnlyOod:
      return sample.question;
    case EvalMode::kIdkPrompting:
      return setting.instruction.value_or(std::string(kIdkPromptingInstruction)) + "\n\n" + sample.question;
    case EvalMode::kFewShot: {
      auto block = [](const std::string& q, const std::string& a) {
        return "Question: " + q + "\nAnswer: " + a + "\n\n";
      };
      return *setting.instruction + "\n\n" + block(setting.demos->known.question, setting.demos->known.answer) +
             block(setting.demos->refusal.question, setting.demos->refusal.answer) +
             "Question: " + sample.question + "\nAnswer:";
    }
  }
  return sample.question;
}

}  // namespace kbound::evaluation
