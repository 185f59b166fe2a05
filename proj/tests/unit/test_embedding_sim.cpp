#include <gtest/gtest.h>
#include <httplib.h>

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "radsim/embedding_sim.hpp"
#include "radsim/gt_similarity.hpp"
#include "radsim/hashing.hpp"
#include "test_support.hpp"

using namespace radsim;

namespace {

double norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

GeneratedLabelSet set(std::string id, std::vector<std::string> labels) {
  GeneratedLabelSet s;
  s.report_id = std::move(id);
  s.labels = std::move(labels);
  return s;
}

// In-process stand-in for the embedding sidecar. Vectors are deliberately
// not unit length so the client's renormalization is exercised.
class FakeEmbedServer {
 public:
  FakeEmbedServer() {
    server_.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(nlohmann::json{{"status", "ok"}, {"model", model}}.dump(),
                      "application/json");
    });
    server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests;
      if (fail_next > 0) {
        --fail_next;
        res.status = 503;
        return;
      }
      const auto texts = nlohmann::json::parse(req.body).at("texts");
      max_batch = std::max<std::size_t>(max_batch, texts.size());
      if (texts.empty()) {
        res.status = 400;
        res.set_content("{\"detail\":\"texts must be non-empty\"}", "application/json");
        return;
      }
      nlohmann::json vectors = nlohmann::json::array();
      std::size_t i = 0;
      for (const auto& t : texts) {
        const auto text = t.get<std::string>();
        const std::size_t d = (ragged && i++ == 1) ? dim + 1 : dim;
        std::vector<double> v(d, 0.0);
        v[text.size() % d] = 3.0;
        v[(text.size() + 1) % d] += 4.0;
        vectors.push_back(v);
      }
      res.set_content(nlohmann::json{{"model", model}, {"dim", dim}, {"vectors", vectors}}.dump(),
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEmbedServer() {
    server_.stop();
    thread_.join();
  }
  HttpEmbedderConfig config() const {
    HttpEmbedderConfig c;
    c.url = "http://127.0.0.1:" + std::to_string(port_);
    c.max_retries = 2;
    c.timeout = std::chrono::milliseconds(2000);
    c.initial_backoff = std::chrono::milliseconds(1);
    return c;
  }

  std::string model = "fake-mpnet";
  std::size_t dim = 8;
  bool ragged = false;
  std::atomic<int> fail_next{0};
  std::atomic<int> requests{0};
  std::atomic<std::size_t> max_batch{0};

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(LabelsetToText, JoinsTrimmedLabels) {
  EXPECT_EQ(labelset_to_text(set("r", {"cardiomegaly present", "pleural effusion present"})),
            "cardiomegaly present; pleural effusion present");
  EXPECT_EQ(labelset_to_text(set("r", {"single"})), "single");
  EXPECT_EQ(labelset_to_text(set("r", {"  a ", "\tb\n"})), "a; b");
  EXPECT_ERROR_KIND(labelset_to_text(set("r", {})), EmptyLabelSet);
  EXPECT_ERROR_KIND(labelset_to_text(set("r", {"  "})), EmptyLabelSet);
}

TEST(Hashed, DeterministicUnitNormAndMinDimension) {
  HashedEmbedder h(256, 0);
  EmbeddingCache cache;
  Embedder e(h, cache);
  const std::vector<std::string> texts{"a a b", "a a b"};
  const auto v = e.embed(texts);
  EXPECT_EQ(v[0].values, v[1].values);
  EXPECT_NEAR(norm(v[0].values), 1.0, 1e-12);
  EXPECT_EQ(v[0].fingerprint, "hashed:d=256:seed=0");
  EXPECT_ERROR_KIND(HashedEmbedder(63, 0), InvalidConfig);
}

TEST(Hashed, BucketsFollowSeededFnv) {
  HashedEmbedder h(64, 5);
  const auto raw = h.embed_one("Effusion effusion");
  EXPECT_EQ(raw[fnv1a64("effusion", 5) % 64], 2.0);
}

TEST(Hashed, SemanticOrderingOnSharedTokens) {
  HashedEmbedder h;
  EmbeddingCache cache;
  Embedder e(h, cache);
  const std::vector<std::string> t{"pleural effusion", "pleural effusion present", "clear lungs"};
  const auto v = e.embed(t);
  EXPECT_GT(cosine(v[0].values, v[1].values), cosine(v[0].values, v[2].values));
}

TEST(Hashed, PunctuationOnlyTextFailsNormalization) {
  HashedEmbedder h;
  EmbeddingCache cache;
  Embedder e(h, cache);
  EXPECT_ERROR_KIND(e.embed(std::vector<std::string>{"..."}), NormalizationFailure);
  EXPECT_ERROR_KIND(e.embed(std::vector<std::string>{""}), InvalidArgument);
}

TEST(Embedder, CacheMeansOneProviderCallPerDistinctText) {
  testkit::TempDir dir;
  HashedEmbedder h;
  const std::vector<std::string> texts{"x", "y", "x", "z", "y"};
  {
    EmbeddingCache cache(dir / "emb.jsonl");
    Embedder e(h, cache, {2, 2});
    e.embed(texts);
    EXPECT_EQ(e.provider_texts(), 3u);
    EXPECT_EQ(e.provider_batches(), 2u);
    e.embed(texts);
    EXPECT_EQ(e.provider_texts(), 3u);
    cache.compact();
  }
  EmbeddingCache reloaded(dir / "emb.jsonl");
  EXPECT_EQ(reloaded.size(), 3u);
  Embedder e2(h, reloaded);
  const auto v = e2.embed(texts);
  EXPECT_EQ(e2.provider_texts(), 0u);
  EXPECT_NEAR(norm(v[3].values), 1.0, 1e-12);
  // A different fingerprint does not reuse those vectors.
  HashedEmbedder other(128, 0);
  Embedder e3(other, reloaded);
  e3.embed(texts);
  EXPECT_EQ(e3.provider_texts(), 3u);
}

TEST(GptSim, IdentityDisjointAndSymmetry) {
  HashedEmbedder h;
  EmbeddingCache cache;
  Embedder e(h, cache);
  const auto a = set("a", {"cardiomegaly present", "pleural effusion present"});
  const auto b = set("b", {"pneumothorax"});
  EXPECT_NEAR(gpt_sim(a, a, e), 1.0, 1e-15);
  for (auto mode : {CombineMode::Join, CombineMode::MeanPool}) {
    EXPECT_EQ(gpt_sim(a, b, e, mode), gpt_sim(b, a, e, mode));
  }
  // Single-token labels in distinct buckets are orthogonal.
  std::string t1 = "alpha", t2 = "beta";
  ASSERT_NE(fnv1a64(t1, 0) % 256, fnv1a64(t2, 0) % 256);
  EXPECT_EQ(gpt_sim(set("p", {t1}), set("q", {t2}), e), 0.0);
}

TEST(GptSim, MeanPoolIgnoresLabelOrderExactly) {
  HashedEmbedder h;
  EmbeddingCache cache;
  Embedder e(h, cache);
  std::vector<std::string> labels{"left pleural effusion", "cardiomegaly", "no pneumothorax",
                                  "atelectasis of the left base", "support devices in place"};
  const auto other = set("o", {"edema", "cardiomegaly"});
  const double ref = gpt_sim(set("p", labels), other, e, CombineMode::MeanPool);
  std::mt19937 rng(4);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(labels.begin(), labels.end(), rng);
    EXPECT_EQ(gpt_sim(set("p", labels), other, e, CombineMode::MeanPool), ref);
  }
  EXPECT_EQ(parse_combine_mode("mean-pool"), CombineMode::MeanPool);
  EXPECT_ERROR_KIND(parse_combine_mode("max"), InvalidConfig);
}

TEST(PrecomputedFile, LooksUpBySha) {
  testkit::TempDir dir;
  testkit::spit(dir / "vecs.jsonl",
                nlohmann::json{{"text_sha256", sha256_hex("hello")}, {"vector", {3.0, 4.0}}}
                        .dump() + "\n");
  PrecomputedFileEmbedder f(dir / "vecs.jsonl");
  EmbeddingCache cache;
  Embedder e(f, cache);
  const auto v = e.embed(std::vector<std::string>{"hello"});
  EXPECT_DOUBLE_EQ(v[0].values[0], 0.6);
  EXPECT_DOUBLE_EQ(v[0].values[1], 0.8);
  EXPECT_ERROR_KIND(e.embed(std::vector<std::string>{"unknown"}), ProviderError);
}

TEST(HttpEmbed, OrderBatchingAndRenormalization) {
  FakeEmbedServer server;
  HttpEmbedder http(server.config());
  EXPECT_EQ(http.health(), "fake-mpnet");
  EmbeddingCache cache;
  Embedder e(http, cache, {64, 4});
  std::vector<std::string> texts;
  for (int i = 0; i < 150; ++i) texts.push_back(std::string(static_cast<std::size_t>(1 + i), 'w'));
  const auto v = e.embed(texts);
  ASSERT_EQ(v.size(), 150u);
  EXPECT_LE(server.max_batch.load(), 64u);
  EXPECT_EQ(e.provider_batches(), 3u);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    EXPECT_NEAR(norm(v[i].values), 1.0, 1e-12);
    // Position encodes the text length, so order is checkable.
    EXPECT_DOUBLE_EQ(v[i].values[texts[i].size() % 8], 0.6);
    EXPECT_DOUBLE_EQ(v[i].values[(texts[i].size() + 1) % 8], 0.8);
  }
  EXPECT_EQ(v[0].fingerprint, "http:fake-mpnet");
  EXPECT_EQ(*e.dimension(), 8u);
}

TEST(HttpEmbed, RetriesServiceUnavailable) {
  FakeEmbedServer server;
  server.fail_next = 2;
  HttpEmbedder http(server.config());
  const std::vector<std::string> texts{"a"};
  EXPECT_EQ(http.embed_batch(texts).size(), 1u);
  server.fail_next = 10;
  EXPECT_ERROR_KIND(http.embed_batch(texts), ProviderError);
}

TEST(HttpEmbed, BadRequestIsProviderError) {
  FakeEmbedServer server;
  HttpEmbedder http(server.config());
  EXPECT_ERROR_KIND(http.embed_batch(std::vector<std::string>{}), ProviderError);
}

TEST(HttpEmbed, DimensionMismatchWithinResponseAndAcrossCalls) {
  FakeEmbedServer server;
  server.ragged = true;
  HttpEmbedder http(server.config());
  EXPECT_ERROR_KIND(http.embed_batch(std::vector<std::string>{"a", "bb"}), DimensionMismatch);
  server.ragged = false;

  EmbeddingCache cache;
  Embedder e(http, cache);
  e.embed(std::vector<std::string>{"first"});
  server.dim = 16;
  EXPECT_ERROR_KIND(e.embed(std::vector<std::string>{"second"}), DimensionMismatch);
}

TEST(HttpEmbed, UnhealthyService) {
  HttpEmbedderConfig c;
  c.url = "http://127.0.0.1:1";
  c.max_retries = 0;
  c.timeout = std::chrono::milliseconds(200);
  HttpEmbedder http(c);
  EXPECT_ERROR_KIND(http.fingerprint(), ProviderError);
}
