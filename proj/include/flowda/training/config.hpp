#pragma once

#include <charconv>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "flowda/layers/attention.hpp"

namespace flowda {

enum class TrainMode { kAdversarial, kSeq2SeqTl, kLstmTl };

inline const char* to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kAdversarial: return "adversarial";
    case TrainMode::kSeq2SeqTl: return "seq2seq_tl";
    case TrainMode::kLstmTl: return "lstm_tl";
  }
  return "?";
}

inline TrainMode parse_train_mode(const std::string& text) {
  if (text == "adversarial") return TrainMode::kAdversarial;
  if (text == "seq2seq_tl") return TrainMode::kSeq2SeqTl;
  if (text == "lstm_tl") return TrainMode::kLstmTl;
  throw std::invalid_argument("unknown mode '" + text + "' (expected adversarial, seq2seq_tl or lstm_tl)");
}

inline const char* to_string(AttentionScoring s) { return s == AttentionScoring::kAdditive ? "additive" : "dot"; }

inline AttentionScoring parse_scoring(const std::string& text) {
  if (text == "additive") return AttentionScoring::kAdditive;
  if (text == "dot") return AttentionScoring::kDot;
  throw std::invalid_argument("unknown attention scoring '" + text + "' (expected additive or dot)");
}

struct TrainConfig {
  TrainMode mode = TrainMode::kAdversarial;
  std::size_t hidden_size = 128;
  std::size_t embedding_width = 0;  // 0: hidden_size
  std::size_t attention_width = 0;  // 0: hidden_size
  std::size_t latent_width = 64;
  std::size_t discriminator_hidden = 64;
  AttentionScoring scoring = AttentionScoring::kAdditive;
  double dropout = 0.4;
  double lambda = 0.1;
  double lr_first_epoch = 0.001;
  double lr_rest = 0.0005;
  std::size_t epochs = 100;
  std::size_t pretrain_epochs = 0;  // transfer baselines; 0: same as epochs
  std::size_t batch_size = 64;
  std::size_t history = 90;  // N
  std::size_t horizon = 1;   // tau
  std::size_t stride = 1;
  double clip_norm = 1.0;     // per parameter group; 0 disables
  double loss_epsilon = 0.1;
  std::uint64_t seed = 0;

  std::size_t effective_pretrain_epochs() const { return pretrain_epochs ? pretrain_epochs : epochs; }

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
    if (!(lambda >= 0.0)) fail("lambda must be >= 0");
    if (epochs < 1) fail("epochs must be >= 1");
    if (hidden_size < 1 || latent_width < 1 || discriminator_hidden < 1) fail("layer widths must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
    if (!(lr_first_epoch > 0.0 && lr_rest > 0.0)) fail("learning rates must be > 0");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (history < 1 || horizon < 1 || stride < 1) fail("history, horizon and stride must be >= 1");
    if (!(clip_norm >= 0.0)) fail("clip_norm must be >= 0");
    if (!(loss_epsilon > 0.0)) fail("loss_epsilon must be > 0");
  }

  /// Settings that determine parameter shapes and input layout. Checkpoints
  /// store the hash of this text; evaluation refuses a mismatched config.
  std::string architecture_text() const {
    std::ostringstream os;
    os << "mode=" << to_string(mode) << ";hidden=" << hidden_size << ";embedding=" << embedding_width
       << ";attention=" << attention_width << ";latent=" << latent_width << ";disc_hidden=" << discriminator_hidden
       << ";scoring=" << to_string(scoring) << ";history=" << history << ";horizon=" << horizon;
    return os.str();
  }
};

namespace detail {

inline std::string shortest(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double_value(const std::string& key, const std::string& text) {
  double v = 0.0;
  auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size()) {
    throw std::invalid_argument("invalid value '" + text + "' for " + key + " (expected a number)");
  }
  return v;
}

inline std::uint64_t parse_uint_value(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size()) {
    throw std::invalid_argument("invalid value '" + text + "' for " + key + " (expected a non-negative integer)");
  }
  return v;
}

}  // namespace detail

/// Every TrainConfig field as (key, text). Doubles use the shortest
/// round-trip form, so parsing the text restores the exact value.
inline std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& c) {
  using detail::shortest;
  return {{"mode", to_string(c.mode)},
          {"hidden_size", std::to_string(c.hidden_size)},
          {"embedding_width", std::to_string(c.embedding_width)},
          {"attention_width", std::to_string(c.attention_width)},
          {"latent_width", std::to_string(c.latent_width)},
          {"discriminator_hidden", std::to_string(c.discriminator_hidden)},
          {"scoring", to_string(c.scoring)},
          {"dropout", shortest(c.dropout)},
          {"lambda", shortest(c.lambda)},
          {"lr_first_epoch", shortest(c.lr_first_epoch)},
          {"lr_rest", shortest(c.lr_rest)},
          {"epochs", std::to_string(c.epochs)},
          {"pretrain_epochs", std::to_string(c.pretrain_epochs)},
          {"batch_size", std::to_string(c.batch_size)},
          {"history", std::to_string(c.history)},
          {"horizon", std::to_string(c.horizon)},
          {"stride", std::to_string(c.stride)},
          {"clip_norm", shortest(c.clip_norm)},
          {"loss_epsilon", shortest(c.loss_epsilon)},
          {"seed", std::to_string(c.seed)}};
}

/// Sets one field by key. Returns false for an unknown key.
inline bool set_config_entry(TrainConfig& c, const std::string& key, const std::string& value) {
  auto u = [&] { return static_cast<std::size_t>(detail::parse_uint_value(key, value)); };
  auto d = [&] { return detail::parse_double_value(key, value); };
  if (key == "mode") c.mode = parse_train_mode(value);
  else if (key == "hidden_size") c.hidden_size = u();
  else if (key == "embedding_width") c.embedding_width = u();
  else if (key == "attention_width") c.attention_width = u();
  else if (key == "latent_width") c.latent_width = u();
  else if (key == "discriminator_hidden") c.discriminator_hidden = u();
  else if (key == "scoring") c.scoring = parse_scoring(value);
  else if (key == "dropout") c.dropout = d();
  else if (key == "lambda") c.lambda = d();
  else if (key == "lr_first_epoch") c.lr_first_epoch = d();
  else if (key == "lr_rest") c.lr_rest = d();
  else if (key == "epochs") c.epochs = u();
  else if (key == "pretrain_epochs") c.pretrain_epochs = u();
  else if (key == "batch_size") c.batch_size = u();
  else if (key == "history") c.history = u();
  else if (key == "horizon") c.horizon = u();
  else if (key == "stride") c.stride = u();
  else if (key == "clip_norm") c.clip_norm = d();
  else if (key == "loss_epsilon") c.loss_epsilon = d();
  else if (key == "seed") c.seed = detail::parse_uint_value(key, value);
  else return false;
  return true;
}

inline std::string config_text(const TrainConfig& c) {
  std::string out;
  for (const auto& [k, v] : config_entries(c)) out += k + "=" + v + "\n";
  return out;
}

inline TrainConfig parse_config_text(const std::string& text) {
  TrainConfig c;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("malformed config line '" + line + "'");
    const std::string key = line.substr(0, eq);
    if (!set_config_entry(c, key, line.substr(eq + 1))) throw std::invalid_argument("unknown config key '" + key + "'");
  }
  return c;
}

/// 64-bit FNV-1a; stable across platforms, unlike std::hash.
inline std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace flowda
