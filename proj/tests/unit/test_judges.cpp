// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>

#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <nlohmann/json.hpp>
#include <set>
#include <thread>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "sopforge/judges.hpp"
#include "sopforge/metrics.hpp"

using namespace sopforge;

namespace {

std::vector<Video> random_set(Seed64 seed, std::size_t k, std::size_t t = 4) {
  std::vector<Video> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(testing_support::random_video(seed * 31 + i, t));
  return out;
}

/// Local judge endpoint answering every POST with a canned reply.
class FakeJudge {
 public:
  explicit FakeJudge(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/rank", [this, handler](const httplib::Request& req, httplib::Response& res) {
      ++calls;
      last_body = req.body;
      handler(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeJudge() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/rank"; }

  std::atomic<int> calls{0};
  std::string last_body;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

JudgeSpec external(const std::string& url) {
  JudgeSpec s;
  s.kind = JudgeKind::External;
  s.endpoint = url;
  s.timeout = std::chrono::milliseconds(2000);
  return s;
}

}  // namespace

TEST(Catalog, TenCriteriaInOrder) {
  const auto& cat = criteria_catalog();
  ASSERT_EQ(cat.size(), 10u);
  EXPECT_EQ(cat[0].text.rfind("Evaluate the visual clarity", 0), 0u);
  for (std::size_t i = 0; i < cat.size(); ++i) {
    EXPECT_EQ(cat[i].id, static_cast<int>(i + 1));
    EXPECT_FALSE(cat[i].text.empty());
  }
  std::set<int> drawn;
  for (Seed64 s = 0; s < 500; ++s) {
    const int c = draw_criterion(s);
    ASSERT_GE(c, 1);
    ASSERT_LE(c, 10);
    drawn.insert(c);
  }
  EXPECT_EQ(drawn.size(), 10u);
}

TEST(RankingType, OnlyPermutations) {
  EXPECT_NO_THROW(Ranking({2, 0, 1}));
  EXPECT_ERROR_CODE(Ranking({0, 0, 1, 2}), ErrorCode::MalformedRanking);
  EXPECT_ERROR_CODE(Ranking({0, 3}), ErrorCode::MalformedRanking);
  EXPECT_ERROR_CODE(Ranking({}), ErrorCode::MalformedRanking);
  EXPECT_EQ(Ranking({2, 0, 1}).top(), 2u);
}

TEST(OracleJudge, ZeroLossWinsAndTiesByIndex) {
  const Video target = testing_support::oracle_video("a red blob");
  std::vector<Frame> frames;
  for (const auto& f : target.frames()) {
    std::vector<float> px(f.pixels().begin(), f.pixels().end());
    for (auto& p : px) p *= 0.5f;
    frames.emplace_back(f.height(), f.width(), std::move(px));
  }
  const std::vector<Video> pair = {target, Video(frames)};
  EXPECT_EQ(oracle_judge_rank(pair, target).order(), (std::vector<std::size_t>{0, 1}));
  const std::vector<Video> same(4, target);
  EXPECT_EQ(oracle_judge_rank(same, target).order(), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_ERROR_CODE(oracle_judge_rank(std::vector<Video>{target}, target), ErrorCode::TooFewCandidates);
  EXPECT_ERROR_CODE(oracle_judge_rank(random_set(1, 2, 3), target), ErrorCode::DimensionMismatch);
}

TEST(OracleJudge, MatchesIndependentSort) {
  for (Seed64 s = 0; s < 50; ++s) {
    const auto cands = random_set(s, 4);
    const Video target = testing_support::random_video(9999 + s, 4);
    oracle::Vec key;
    for (const auto& c : cands) key.push_back(oracle::mse(c, target));
    EXPECT_EQ(oracle_judge_rank(cands, target).order(), oracle::argsort(key, false));
  }
}

TEST(OracleJudge, RotationEquivariant) {
  for (Seed64 s = 0; s < 30; ++s) {
    auto cands = random_set(s, 4);
    const Video target = testing_support::random_video(500 + s, 4);
    const auto base = oracle_judge_rank(cands, target).order();
    std::rotate(cands.begin(), cands.begin() + 1, cands.end());  // new index i holds old i+1
    const auto rotated = oracle_judge_rank(cands, target).order();
    for (std::size_t r = 0; r < 4; ++r) EXPECT_EQ((rotated[r] + 1) % 4, base[r]);
  }
}

TEST(QualityJudge, ScoreAndOrder) {
  const Video moving = testing_support::oracle_video("a large bright blob moving right slowly");
  const Video still = testing_support::constant_video(kDefaultFrames, 0.2f);
  const double want_moving = oracle::motion_smoothness(moving) - std::abs(oracle::dynamic_degree(moving) - 0.15);
  EXPECT_NEAR(quality_score(moving), want_moving, 1e-12);
  EXPECT_NEAR(quality_score(still), oracle::motion_smoothness(still) - 0.15, 1e-12);
  const std::vector<Video> pair = {still, moving};
  const auto order = quality_judge_rank(pair).order();
  EXPECT_EQ(order[0], quality_score(moving) > quality_score(still) ? 1u : 0u);
  EXPECT_EQ(quality_judge_rank(std::vector<Video>(3, moving)).order(), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(QualityJudge, MatchesIndependentSort) {
  for (Seed64 s = 0; s < 30; ++s) {
    const auto cands = random_set(s, 4);
    oracle::Vec key;
    for (const auto& c : cands) key.push_back(oracle::motion_smoothness(c) - std::abs(oracle::dynamic_degree(c) - 0.15));
    EXPECT_EQ(quality_judge_rank(cands).order(), oracle::argsort(key, true));
  }
}

TEST(Judges, FuzzAlwaysPermutationAndDeterministic) {
  SplitMix64 gen(77);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = 2 + gen.next() % 5;
    const std::size_t t = 1 + gen.next() % 4;
    const auto cands = random_set(gen.next(), k, t);
    const Video target = testing_support::random_video(gen.next(), t);
    for (const auto& r : {oracle_judge_rank(cands, target), quality_judge_rank(cands)}) {
      auto sorted = r.order();
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t j = 0; j < k; ++j) ASSERT_EQ(sorted[j], j);
    }
    if (i % 100 == 0) {
      EXPECT_EQ(quality_judge_rank(cands), quality_judge_rank(cands));
    }
  }
}

TEST(Dispatch, BuiltinsMatchDirectCalls) {
  const auto cands = random_set(3, 4);
  const Video target = testing_support::random_video(4, 4);
  const auto judges = default_judges();
  ASSERT_EQ(judges.size(), 2u);
  JudgeContext ctx{3, &target};
  EXPECT_EQ(rank_candidates(judges[0], cands, ctx), oracle_judge_rank(cands, target));
  EXPECT_EQ(rank_candidates(judges[1], cands, ctx), quality_judge_rank(cands));
  EXPECT_ERROR_CODE(rank_candidates(judges[0], cands, JudgeContext{3, nullptr}), ErrorCode::InputMismatch);
  EXPECT_EQ(judge_kind_from_name(judge_kind_name(JudgeKind::External)), JudgeKind::External);
  JudgeSpec bad;
  bad.kind = JudgeKind::External;
  EXPECT_ERROR_CODE(bad.validate(), ErrorCode::InvalidConfig);
}

TEST(External, ValidReplyAndRequestShape) {
  FakeJudge judge([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"order":[3,1,0,2]})", "application/json");
  });
  const auto cands = random_set(5, 4);
  const auto r = rank_candidates(external(judge.url()), cands, JudgeContext{2, nullptr});
  EXPECT_EQ(r.order(), (std::vector<std::size_t>{3, 1, 0, 2}));
  const auto body = nlohmann::json::parse(judge.last_body);
  EXPECT_EQ(body.at("criterion_text").get<std::string>(), std::string(criteria_catalog()[1].text));
  EXPECT_EQ(body.at("candidates").size(), 4u);
}

TEST(External, MalformedReplies) {
  for (const std::string reply : {R"({"order":[0,0,1,2]})", R"({"order":[0,1]})", R"({"order":"best"})",
                                  R"({"order":[0,1,2,-3]})", "not json"}) {
    FakeJudge judge([reply](const httplib::Request&, httplib::Response& res) {
      res.set_content(reply, "application/json");
    });
    SCOPED_TRACE(reply);
    EXPECT_ERROR_CODE(rank_candidates(external(judge.url()), random_set(6, 4), JudgeContext{}),
                      ErrorCode::MalformedRanking);
  }
}

TEST(External, UnavailableOnErrorStatusOrRefusal) {
  {
    FakeJudge judge([](const httplib::Request&, httplib::Response& res) { res.status = 503; });
    EXPECT_ERROR_CODE(rank_candidates(external(judge.url()), random_set(7, 3), JudgeContext{}),
                      ErrorCode::JudgeUnavailable);
  }
  std::string closed;
  {
    FakeJudge judge([](const httplib::Request&, httplib::Response&) {});
    closed = judge.url();
  }
  EXPECT_ERROR_CODE(rank_candidates(external(closed), random_set(7, 3), JudgeContext{}),
                    ErrorCode::JudgeUnavailable);
}
