#include "locle/annotate.hpp"

#include "locle/rng.hpp"

#include <openssl/evp.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

// httplib pulls in OpenSSL when this is set; we only use plain HTTP plus
// optional HTTPS if the platform provides it.
#include <httplib.h>

namespace locle {

namespace {

constexpr const char* kPreamble =
    "You are a model that is especially good at classifying a paper's "
    "category. Now I will first give you all the possible categories and "
    "their explanations. Please answer the following question: What is the "
    "category of the target paper?";

constexpr const char* kFormatInstruction =
    "Output your answer together with a confidence score ranging from 0 to "
    "100, in the form of a list of Python dicts like [{\"answer\": "
    "<answer_here>, \"confidence\": <confidence_here>}]. You only need to "
    "output the one answer you think is the most likely.";

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

std::string to_string(AnnotationSource s) {
  switch (s) {
    case AnnotationSource::llm: return "llm";
    case AnnotationSource::oracle: return "oracle";
    case AnnotationSource::gnn_refined: return "gnn_refined";
  }
  return "llm";
}

AnnotationSource annotation_source_from_string(const std::string& s) {
  if (s == "oracle") return AnnotationSource::oracle;
  if (s == "gnn_refined") return AnnotationSource::gnn_refined;
  return AnnotationSource::llm;
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string build_prompt(const PromptSpec& spec, const std::string& node_text) {
  if (spec.class_names.empty()) {
    throw ValidationError("build_prompt: no class names");
  }
  if (!spec.class_explanations.empty() &&
      spec.class_explanations.size() != spec.class_names.size()) {
    throw ValidationError("build_prompt: explanations do not align with classes");
  }
  if (node_text.empty()) throw ValidationError("build_prompt: empty node text");

  std::ostringstream head;
  head << (spec.task_preamble.empty() ? kPreamble : spec.task_preamble) << "\n";
  head << "All possible categories: [";
  for (std::size_t i = 0; i < spec.class_names.size(); ++i) {
    if (i) head << ", ";
    head << spec.class_names[i];
  }
  head << "]\n";
  if (!spec.class_explanations.empty()) {
    head << "Category explanation:\n";
    for (std::size_t i = 0; i < spec.class_names.size(); ++i) {
      head << spec.class_names[i] << ": " << spec.class_explanations[i] << "\n";
    }
  }
  head << "Target Paper:\n";
  const std::string head_str = head.str();
  const std::string tail = std::string("\n") + kFormatInstruction;

  // Token budget at ~4 characters per token; only the node text shrinks.
  const std::size_t budget_chars =
      static_cast<std::size_t>(spec.max_text_tokens) * 4;
  const std::size_t fixed = head_str.size() + tail.size();
  std::string text = node_text;
  if (fixed + text.size() > budget_chars) {
    text = text.substr(0, budget_chars > fixed ? budget_chars - fixed : 0);
  }
  return head_str + text + tail;
}

std::pair<int, double> parse_annotation_response(
    const std::string& text, const std::vector<std::string>& class_names) {
  // Scan every {...} block for the answer/confidence pair; the first block
  // carrying both keys wins.
  std::size_t pos = 0;
  while ((pos = text.find('{', pos)) != std::string::npos) {
    const std::size_t close = text.find('}', pos);
    if (close == std::string::npos) break;
    const std::string body = text.substr(pos + 1, close - pos - 1);
    pos = close + 1;

    auto find_value = [&body](const std::string& key) -> std::optional<std::string> {
      std::size_t k = 0;
      while ((k = body.find(key, k)) != std::string::npos) {
        // The key must itself be quoted or bare, followed by ':'.
        std::size_t colon = body.find(':', k + key.size());
        if (colon == std::string::npos) return std::nullopt;
        std::size_t v = colon + 1;
        while (v < body.size() && std::isspace(static_cast<unsigned char>(body[v]))) {
          ++v;
        }
        if (v >= body.size()) return std::nullopt;
        if (body[v] == '"' || body[v] == '\'') {
          const char quote = body[v];
          const std::size_t end = body.find(quote, v + 1);
          if (end == std::string::npos) return std::nullopt;
          return body.substr(v + 1, end - v - 1);
        }
        std::size_t end = v;
        while (end < body.size() && body[end] != ',' && body[end] != '}') ++end;
        return trim(body.substr(v, end - v));
      }
      return std::nullopt;
    };

    const auto answer = find_value("answer");
    const auto confidence = find_value("confidence");
    if (!answer || !confidence) continue;

    double conf = 0.0;
    try {
      conf = std::stod(*confidence);
    } catch (const std::exception&) {
      continue;
    }
    conf = std::clamp(conf, 0.0, 100.0);

    const std::string wanted = lower(trim(*answer));
    for (std::size_t c = 0; c < class_names.size(); ++c) {
      if (lower(trim(class_names[c])) == wanted) {
        return {static_cast<int>(c), conf};
      }
    }
    throw UnknownLabel("answer matches no class: " + *answer);
  }
  throw ParseError("no answer/confidence object found in response");
}

AnnotationCache::AnnotationCache(std::string path) : path_(std::move(path)) {
  std::ifstream is(path_);
  std::string line;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("key")) continue;
    Annotation ann;
    ann.node_id = j.value("node_id", -1);
    ann.label = j.value("label", -1);
    ann.confidence = j.value("confidence", 0.0);
    ann.source = annotation_source_from_string(j.value("source", "llm"));
    ann.failed = j.value("failed", false);
    entries_[j["key"].get<std::string>()] = ann;
  }
}

std::optional<Annotation> AnnotationCache::find(const std::string& key) const {
  std::lock_guard lock(m_);
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void AnnotationCache::put(const std::string& key, const Annotation& ann) {
  std::lock_guard lock(m_);
  if (!entries_.emplace(key, ann).second) return;  // already recorded
  if (path_.empty()) return;
  std::ofstream os(path_, std::ios::app);
  if (!os) return;
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char ts[32];
  std::strftime(ts, sizeof(ts), "%FT%TZ", std::gmtime(&now));
  nlohmann::json j{{"node_id", ann.node_id},
                   {"label", ann.label},
                   {"confidence", ann.confidence},
                   {"source", to_string(ann.source)},
                   {"prompt_sha256", sha256_hex(key)},
                   {"ts", ts},
                   {"key", key},
                   {"failed", ann.failed}};
  os << j.dump() << "\n";
}

std::size_t AnnotationCache::size() const {
  std::lock_guard lock(m_);
  return entries_.size();
}

namespace {

Annotation vote(int node_id, const std::vector<Annotation>& samples) {
  std::map<int, std::pair<int, double>> tally;  // label -> (count, conf sum)
  for (const Annotation& s : samples) {
    auto& t = tally[s.label];
    ++t.first;
    t.second += s.confidence;
  }
  int best_label = -1;
  int best_count = -1;
  double best_conf = -1.0;
  for (const auto& [label, t] : tally) {
    if (t.first > best_count ||
        (t.first == best_count && t.second > best_conf)) {
      // std::map iterates labels ascending, so equal (count, conf) keeps the
      // smallest label.
      best_label = label;
      best_count = t.first;
      best_conf = t.second;
    }
  }
  Annotation out;
  out.node_id = node_id;
  out.label = best_label;
  out.confidence = best_conf / best_count;
  out.source = samples.front().source;
  out.raw_response = samples.front().raw_response;
  return out;
}

}  // namespace

std::vector<Annotation> annotate_batch(Annotator& annotator,
                                       const std::vector<int>& nodes,
                                       BudgetLedger& ledger, AnnotationCache* cache,
                                       const AnnotateOptions& options) {
  const int n_consistency = std::max(1, options.n_consistency);

  struct Slot {
    int node;
    std::string key;
    bool cached = false;
    Annotation result;
  };
  std::vector<Slot> slots(nodes.size());
  int uncached = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    slots[i].node = nodes[i];
    std::string key = annotator.cache_key(nodes[i]);
    if (!key.empty()) key += ":n=" + std::to_string(n_consistency);
    slots[i].key = key;
    if (cache && !key.empty()) {
      if (auto hit = cache->find(key)) {
        slots[i].cached = true;
        slots[i].result = *hit;
        continue;
      }
    }
    ++uncached;
  }

  // All-or-nothing budget check before any sampling.
  if (uncached > ledger.remaining()) {
    throw BudgetExhausted("batch of " + std::to_string(uncached) +
                          " uncached nodes exceeds remaining budget " +
                          std::to_string(ledger.remaining()));
  }

  auto process = [&](Slot& slot) {
    ledger.consume(1);
    std::vector<Annotation> samples;
    for (int a = 0; a < n_consistency; ++a) {
      try {
        Annotation s = annotator.sample(slot.node, a);
        s.node_id = slot.node;
        samples.push_back(std::move(s));
      } catch (const AnnotateError&) {
        // This completion failed; others may still succeed.
      }
    }
    if (samples.empty()) {
      slot.result.node_id = slot.node;
      slot.result.failed = true;
      slot.result.confidence = 0.0;
      slot.result.label = -1;
    } else {
      slot.result = vote(slot.node, samples);
    }
    if (cache && !slot.key.empty()) cache->put(slot.key, slot.result);
  };

  const int workers = std::max(1, options.max_in_flight);
  if (workers == 1) {
    for (Slot& slot : slots) {
      if (!slot.cached) process(slot);
    }
  } else {
    std::atomic_size_t next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= slots.size()) return;
          if (!slots[i].cached) process(slots[i]);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  std::vector<Annotation> results;
  results.reserve(slots.size());
  for (Slot& slot : slots) results.push_back(std::move(slot.result));
  std::sort(results.begin(), results.end(),
            [](const Annotation& a, const Annotation& b) {
              return a.node_id < b.node_id;
            });
  return results;
}

std::vector<Annotation> post_filter(const std::vector<Annotation>& annotations,
                                    double min_confidence) {
  std::vector<Annotation> kept;
  kept.reserve(annotations.size());
  for (const Annotation& a : annotations) {
    if (a.failed || a.confidence < min_confidence) continue;
    kept.push_back(a);
  }
  return kept;
}

OracleAnnotator::OracleAnnotator(std::vector<int> labels, int num_classes,
                                 double noise, std::uint64_t seed)
    : labels_(std::move(labels)),
      num_classes_(num_classes),
      noise_(noise),
      seed_(seed) {
  if (num_classes_ < 2) throw ValidationError("oracle: need at least 2 classes");
  for (int y : labels_) {
    if (y < 0 || y >= num_classes_) {
      throw ValidationError("oracle: ground-truth label out of range");
    }
  }
}

Annotation OracleAnnotator::sample(int node_id, int /*attempt*/) {
  if (node_id < 0 || node_id >= static_cast<int>(labels_.size())) {
    throw AnnotateError("oracle: node id out of range");
  }
  Rng rng(mix_seed(seed_, 0x0c1e ^ static_cast<std::uint64_t>(node_id) * 0x9e37ULL));
  Annotation a;
  a.node_id = node_id;
  a.source = AnnotationSource::oracle;
  const int truth = labels_[node_id];
  if (rng.u01() < noise_) {
    const int offset = 1 + static_cast<int>(rng.below(num_classes_ - 1));
    a.label = (truth + offset) % num_classes_;
    a.confidence = rng.uniform(50.0, 95.0);
  } else {
    a.label = truth;
    a.confidence = 100.0;
  }
  return a;
}

std::string OracleAnnotator::cache_key(int node_id) const {
  return "oracle:" + std::to_string(seed_) + ":" + std::to_string(noise_) + ":" +
         std::to_string(node_id);
}

LlmAnnotator::LlmAnnotator(PromptSpec spec, std::vector<std::string> node_texts,
                           LlmOptions options)
    : spec_(std::move(spec)), texts_(std::move(node_texts)), options_(std::move(options)) {
  // Split base_url into scheme, host, port.
  std::string url = options_.base_url;
  if (url.rfind("https://", 0) == 0) {
    https_ = true;
    url = url.substr(8);
    port_ = 443;
  } else if (url.rfind("http://", 0) == 0) {
    url = url.substr(7);
    port_ = 80;
  }
  const std::size_t slash = url.find('/');
  if (slash != std::string::npos) url = url.substr(0, slash);
  const std::size_t colon = url.find(':');
  if (colon != std::string::npos) {
    port_ = std::stoi(url.substr(colon + 1));
    url = url.substr(0, colon);
  }
  host_ = url;
}

std::string LlmAnnotator::prompt_for(int node_id) const {
  if (node_id < 0 || node_id >= static_cast<int>(texts_.size()) ||
      texts_[node_id].empty()) {
    throw AnnotateError("no text for node " + std::to_string(node_id));
  }
  return build_prompt(spec_, texts_[node_id]);
}

std::string LlmAnnotator::cache_key(int node_id) const {
  return sha256_hex(prompt_for(node_id)) + ":" + options_.model;
}

Annotation LlmAnnotator::sample(int node_id, int /*attempt*/) {
  const std::string prompt = prompt_for(node_id);
  nlohmann::json body{
      {"model", options_.model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
      {"temperature", options_.temperature}};

  const char* key = std::getenv(options_.api_key_env.c_str());

  std::string content;
  std::string last_error;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(
          options_.retry_backoff_ms * (1 << (attempt - 1))));
    }
    httplib::Client client(host_, port_);
    client.set_connection_timeout(options_.timeout_sec);
    client.set_read_timeout(options_.timeout_sec);
    httplib::Headers headers;
    if (key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);
    ++calls_;
    auto res = client.Post("/v1/chat/completions", headers, body.dump(),
                           "application/json");
    if (!res) {
      last_error = "connection failed";
      continue;
    }
    if (res->status != 200) {
      last_error = "http status " + std::to_string(res->status);
      continue;
    }
    nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded()) {
      last_error = "unparseable completion body";
      continue;
    }
    try {
      content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const std::exception&) {
      last_error = "missing choices[0].message.content";
      continue;
    }
    const auto [label, confidence] = parse_annotation_response(content, spec_.class_names);
    Annotation a;
    a.node_id = node_id;
    a.label = label;
    a.confidence = confidence;
    a.source = AnnotationSource::llm;
    a.raw_response = content;
    return a;
  }
  throw TransportError("llm request failed after retries: " + last_error);
}

}  // namespace locle
