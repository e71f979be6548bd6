#pragma once

#include "locle/common.hpp"

#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace locle {

enum class AnnotationSource { llm, oracle, gnn_refined };

std::string to_string(AnnotationSource s);
AnnotationSource annotation_source_from_string(const std::string& s);

struct Annotation {
  int node_id = -1;
  int label = -1;  // absent when failed
  double confidence = 0.0;  // [0, 100]
  AnnotationSource source = AnnotationSource::llm;
  bool failed = false;
  std::string raw_response;
};

struct PromptSpec {
  std::vector<std::string> class_names;
  std::vector<std::string> class_explanations;  // empty, or one per class
  std::string task_preamble;  // empty selects the stock preamble
  int max_text_tokens = 4096;
};

/// Deterministic classification prompt: preamble, category list, optional
/// explanation block, the target text (truncated so the whole prompt stays
/// under max_text_tokens at roughly 4 chars per token), and the fixed
/// answer-format instruction.
std::string build_prompt(const PromptSpec& spec, const std::string& node_text);

/// Pulls the first {answer, confidence} object out of a bracketed list,
/// tolerating single quotes and surrounding prose. The answer is matched to
/// `class_names` case-insensitively after trimming; confidence is clamped to
/// [0, 100]. Throws ParseError / UnknownLabel.
std::pair<int, double> parse_annotation_response(
    const std::string& text, const std::vector<std::string>& class_names);

/// Thread-safe query counter; one unit per annotated node.
class BudgetLedger {
 public:
  explicit BudgetLedger(int capacity) : cap_(capacity) {}
  int capacity() const { return cap_; }
  int used() const {
    std::lock_guard lock(m_);
    return used_;
  }
  int remaining() const {
    std::lock_guard lock(m_);
    return cap_ - used_;
  }
  /// Throws BudgetExhausted when fewer than n queries remain.
  void consume(int n) {
    std::lock_guard lock(m_);
    if (used_ + n > cap_) {
      throw BudgetExhausted("annotation budget exhausted: " + std::to_string(used_) +
                            " used of " + std::to_string(cap_));
    }
    used_ += n;
  }

 private:
  mutable std::mutex m_;
  int cap_;
  int used_ = 0;
};

/// Annotation store backed by an append-only JSONL file (one object per
/// line). Lookups and appends are synchronized.
class AnnotationCache {
 public:
  AnnotationCache() = default;  // in-memory only
  explicit AnnotationCache(std::string path);  // loads existing lines

  std::optional<Annotation> find(const std::string& key) const;
  void put(const std::string& key, const Annotation& ann);
  std::size_t size() const;

 private:
  mutable std::mutex m_;
  std::string path_;
  std::map<std::string, Annotation> entries_;
};

/// One annotation source. sample() returns a single completion for a node
/// and throws AnnotateError on failure; annotate_batch handles voting,
/// caching, budget, and output ordering.
class Annotator {
 public:
  virtual ~Annotator() = default;
  virtual Annotation sample(int node_id, int attempt) = 0;
  /// Stable cache key covering everything that determines the answer
  /// (prompt hash and model for LLMs). Empty disables caching for the node.
  virtual std::string cache_key(int node_id) const = 0;
};

struct AnnotateOptions {
  int n_consistency = 1;
  int max_in_flight = 1;
};

/// Annotates `nodes`, consuming one budget unit per uncached node before any
/// sampling happens. Per node: n_consistency completions, majority vote on
/// the label (ties by summed confidence, then smaller label index),
/// confidence = mean over the winning votes. Output is ordered by node id;
/// nodes whose samples all fail come back with failed = true.
std::vector<Annotation> annotate_batch(Annotator& annotator,
                                       const std::vector<int>& nodes,
                                       BudgetLedger& ledger,
                                       AnnotationCache* cache = nullptr,
                                       const AnnotateOptions& options = {});

/// Drops failed annotations and those below `min_confidence`; keeps order.
std::vector<Annotation> post_filter(const std::vector<Annotation>& annotations,
                                    double min_confidence);

/// Ground-truth annotator with label noise: with probability `noise` the
/// true label is swapped for a uniformly random wrong class. Correct picks
/// report confidence 100, flipped ones uniform in [50, 95]. A pure function
/// of (seed, node id).
class OracleAnnotator : public Annotator {
 public:
  OracleAnnotator(std::vector<int> labels, int num_classes, double noise,
                  std::uint64_t seed);

  Annotation sample(int node_id, int attempt) override;
  std::string cache_key(int node_id) const override;

 private:
  std::vector<int> labels_;
  int num_classes_;
  double noise_;
  std::uint64_t seed_;
};

struct LlmOptions {
  std::string base_url = "http://127.0.0.1:8080";
  std::string model = "gpt-3.5-turbo";
  double temperature = 1.0;
  int max_retries = 3;
  int retry_backoff_ms = 250;
  int max_in_flight = 1;
  int timeout_sec = 60;
  std::string api_key_env = "LOCLE_LLM_API_KEY";
};

/// Chat-completions client: POST {model, messages, temperature} with the
/// bearer key from the environment; exponential backoff between retries.
class LlmAnnotator : public Annotator {
 public:
  LlmAnnotator(PromptSpec spec, std::vector<std::string> node_texts,
               LlmOptions options);

  Annotation sample(int node_id, int attempt) override;
  std::string cache_key(int node_id) const override;

  int http_calls() const { return calls_; }

 private:
  std::string prompt_for(int node_id) const;

  PromptSpec spec_;
  std::vector<std::string> texts_;
  LlmOptions options_;
  std::string host_;
  int port_ = 80;
  bool https_ = false;
  std::atomic_int calls_{0};
};

std::string sha256_hex(const std::string& data);

}  // namespace locle
