#include "otd/session.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "otd/numerics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class SessionTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::string tmpl = (fs::temp_directory_path() / "otd_session_XXXXXX").string();
    ASSERT_NE(::mkdtemp(tmpl.data()), nullptr);
    dir_ = tmpl;
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path log_path(const std::string& id) const { return dir_ / (id + ".jsonl"); }

  std::string read_log(const std::string& id) const {
    std::ifstream in(log_path(id), std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  }

  void write_log(const std::string& id, const std::string& text) const {
    std::ofstream out(log_path(id), std::ios::binary | std::ios::trunc);
    out << text;
  }

  fs::path dir_;
};

const json kSeq{{"method", "seq-e-guard"}, {"alpha", 0.05}};

std::vector<std::size_t> replay_worked_example(otd::SessionStore& store, const std::string& id) {
  std::vector<std::size_t> d;
  for (double e : {5.0, 4.0, 0.8, 0.5, 14.0}) {
    store.submit_evidence(id, {{"e", e}});
    d.push_back(store.decide(id, true)["d"].get<std::size_t>());
  }
  return d;
}

}  // namespace

TEST(ProcedureSpec, Validation) {
  EXPECT_NO_THROW(otd::ProcedureSpec::from_json(kSeq));
  EXPECT_THROW(otd::ProcedureSpec::from_json({{"method", "seq-e-guard"}, {"alpha", 0.0}}), otd::InvalidRequest);
  EXPECT_THROW(otd::ProcedureSpec::from_json({{"method", "seq-e-guard"}, {"alpha", 1.0}}), otd::InvalidRequest);
  EXPECT_THROW(otd::ProcedureSpec::from_json({{"method", "closed"}, {"alpha", 0.1}}), otd::InvalidRequest);
  EXPECT_THROW(otd::ProcedureSpec::from_json({{"method", "arbe-guard"}, {"alpha", 0.1}, {"boosting", true}}),
               otd::InvalidRequest);
  EXPECT_THROW(otd::ProcedureSpec::from_json({{"method", "exe-guard"}, {"alpha", 0.1}, {"boosting", true}}),
               otd::InvalidRequest);
  EXPECT_THROW(otd::ProcedureSpec::from_json({{"method", "arbe-guard"}, {"alpha", 0.1}, {"gamma", {0.1, 0.5}}}),
               otd::InvalidRequest);
  try {
    otd::ProcedureSpec::from_json({{"method", "seq-e-guard"}, {"alpha", -1}});
  } catch (const otd::InvalidRequest& e) {
    EXPECT_EQ(e.field(), "alpha");
  }
}

TEST(ProcedureSpec, JsonRoundTrip) {
  for (const json& j : {kSeq, json{{"method", "arbe-guard"}, {"alpha", 0.1}, {"gamma", {{"geometric", 0.5}}}},
                        json{{"method", "exe-guard"}, {"alpha", 0.1}, {"boosting", true}, {"experimental_exe_boost", true}},
                        json{{"method", "seq-e-guard"}, {"alpha", 0.1}, {"boosting", true}}}) {
    const auto spec = otd::ProcedureSpec::from_json(j);
    EXPECT_EQ(otd::ProcedureSpec::from_json(spec.to_json()).to_json(), spec.to_json());
  }
}

TEST_F(SessionTest, CreateAndList) {
  otd::SessionStore store(dir_);
  const auto id = store.create(kSeq);
  EXPECT_EQ(store.bound(id), 0u);
  ASSERT_EQ(store.list().size(), 1u);
  EXPECT_EQ(store.list()[0].id, id);
  EXPECT_TRUE(fs::exists(dir_ / (id + ".meta.json")));
  EXPECT_THROW(store.create({{"method", "seq-e-guard"}, {"alpha", 0}}), otd::InvalidRequest);
  EXPECT_THROW(store.bound("ffff"), otd::NotFound);
}

TEST_F(SessionTest, RequestTokenIsIdempotent) {
  std::string first;
  {
    otd::SessionStore store(dir_);
    first = store.create(kSeq, "token-1");
    EXPECT_EQ(store.create(kSeq, "token-1"), first);
    EXPECT_NE(store.create(kSeq, "token-2"), first);
  }
  otd::SessionStore reopened(dir_);
  EXPECT_EQ(reopened.create(kSeq, "token-1"), first);
  EXPECT_EQ(reopened.list().size(), 2u);
}

TEST_F(SessionTest, WorkedExample) {
  otd::SessionStore store(dir_);
  const auto id = store.create(kSeq);
  EXPECT_EQ(replay_worked_example(store, id), (std::vector<std::size_t>{0, 1, 1, 1, 2}));
  const std::vector<std::size_t> s{1, 2, 5};
  EXPECT_EQ(store.what_if(id, s).bound, 2u);
}

TEST_F(SessionTest, PreviewCutoffOnFreshSession) {
  otd::SessionStore store(dir_);
  const auto id = store.create(kSeq);
  const auto view = store.submit_evidence(id, {{"e", 5}});
  EXPECT_NEAR(view["m_t"].get<double>(), 20.0, 1e-12);
  EXPECT_EQ(view["boost_factor"].get<double>(), 1.0);
  EXPECT_EQ(store.bound(id), 0u);
}

TEST_F(SessionTest, BoostingPreview) {
  otd::SessionStore store(dir_);
  const auto id = store.create({{"method", "seq-e-guard"}, {"alpha", 0.05}, {"boosting", true}});
  const auto view = store.submit_evidence(id, {{"e", 2.0}, {"null_model", {{"delta", 3.0}}}});
  EXPECT_NEAR(view["boost_factor"].get<double>(), otd::boost_factor_lognormal(3.0, 20.0), 1e-12);
  EXPECT_NEAR(otd::parse_double(view["log_e"].get<std::string>()),
              std::log(2.0) + std::log(view["boost_factor"].get<double>()), 1e-12);
}

TEST_F(SessionTest, OnlineSimpleTransform) {
  otd::SessionStore store(dir_);
  const auto id = store.create({{"method", "seq-e-guard"}, {"alpha", 0.1}});
  const auto view =
      store.submit_evidence(id, {{"p", 0.03}, {"transform", {{"kind", "online-simple"}, {"alpha_i", 0.1}, {"a", 1}}}});
  const auto params = otd::OnlineSimpleParams::make(0.1, 1.0);
  EXPECT_NEAR(otd::parse_double(view["log_e"].get<std::string>()), params.theta_c * (1.0 - params.c * 0.1), 1e-12);
}

TEST_F(SessionTest, EvidenceValidation) {
  otd::SessionStore store(dir_);
  const auto id = store.create(kSeq);
  auto field_of = [&](const json& payload) {
    try {
      store.submit_evidence(id, payload);
    } catch (const otd::InvalidRequest& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  EXPECT_EQ(field_of({{"e", -1}}), "e");
  EXPECT_EQ(field_of({{"p", 2.0}, {"transform", {{"kind", "calibrator"}}}}), "p");
  EXPECT_EQ(field_of({{"p", 0.2}}), "transform");
  EXPECT_EQ(field_of({{"p", 0.2}, {"transform", {{"kind", "bonferroni"}}}}), "transform.kind");
  EXPECT_EQ(field_of({{"x", 1.0}, {"gro", {{"mu1", 0.0}}}}), "gro.mu1");
  EXPECT_EQ(field_of(json::object()), "evidence");
}

TEST_F(SessionTest, Conflicts) {
  otd::SessionStore store(dir_);
  const auto id = store.create(kSeq);
  EXPECT_THROW(store.decide(id, true), otd::Conflict);
  store.submit_evidence(id, {{"e", 2}});
  EXPECT_THROW(store.submit_evidence(id, {{"e", 3}}), otd::Conflict);
  store.decide(id, false);
  EXPECT_THROW(store.decide(id, false), otd::Conflict);
}

TEST_F(SessionTest, ExclusionSemantics) {
  otd::SessionStore store(dir_);
  const auto a = store.create(kSeq);
  store.submit_evidence(a, {{"e", 0.5}});
  store.decide(a, false);
  store.submit_evidence(a, {{"e", 20}});
  EXPECT_EQ(store.decide(a, true)["d"], 0u);

  const auto b = store.create(kSeq);
  store.submit_evidence(b, {{"e", 2}});
  store.decide(b, false);
  store.submit_evidence(b, {{"e", 20}});
  EXPECT_EQ(store.decide(b, true)["d"], 1u);
}

TEST_F(SessionTest, WhatIf) {
  otd::SessionStore store(dir_);
  const auto id = store.create(kSeq);
  replay_worked_example(store, id);
  const auto before = store.state_hash(id);
  EXPECT_EQ(store.what_if(id, {}).bound, 0u);
  EXPECT_EQ(store.what_if(id, {1, 2, 3, 4, 5}).bound, store.bound(id));
  EXPECT_EQ(store.what_if(id, {5, 1, 2, 2}).bound, 2u);
  EXPECT_EQ(store.state_hash(id), before);
  EXPECT_THROW(store.what_if(id, {6}), otd::InvalidRequest);
  EXPECT_THROW(store.what_if(id, {0}), otd::InvalidRequest);
  const auto tr = store.trace(id, 0);
  EXPECT_EQ(tr["events"].back()["kind"], "whatif");
}

TEST_F(SessionTest, WhatIfCap) {
  otd::SessionStore store(dir_);
  const auto id = store.create(kSeq);
  for (std::size_t k = 0; k < otd::kOracleCap + 1; ++k) {
    store.submit_evidence(id, {{"e", 1}});
    store.decide(id, true);
  }
  const auto before = store.state_hash(id);
  try {
    store.what_if(id, {1});
    FAIL() << "expected cap error";
  } catch (const otd::OracleCapExceeded& e) {
    EXPECT_EQ(e.cap(), otd::kOracleCap);
    EXPECT_EQ(e.t(), otd::kOracleCap + 1);
  }
  EXPECT_EQ(store.state_hash(id), before);
}

TEST_F(SessionTest, TracePaging) {
  otd::SessionStore store(dir_);
  const auto id = store.create(kSeq);
  auto fresh = store.trace(id, 0);
  ASSERT_EQ(fresh["events"].size(), 1u);
  EXPECT_EQ(fresh["events"][0]["kind"], "created");
  EXPECT_TRUE(store.trace(id, fresh["head"].get<std::uint64_t>())["events"].empty());
  for (int k = 0; k < 600; ++k) {
    store.submit_evidence(id, {{"e", 1}});
    store.decide(id, k % 2 == 0);
  }
  const auto page = store.trace(id, 0);
  EXPECT_EQ(page["events"].size(), otd::kTracePage);
  EXPECT_EQ(page["head"], 1201u);
  const auto rest = store.trace(id, otd::kTracePage);
  EXPECT_EQ(rest["events"].size(), 201u);
  EXPECT_EQ(rest["events"][0]["seq"], otd::kTracePage + 1);
  EXPECT_EQ(rest["trace"].size(), 600u);
}

TEST_F(SessionTest, EventsReplayThroughGuard) {
  otd::SessionStore store(dir_);
  const auto id = store.create({{"method", "seq-e-guard"}, {"alpha", 0.1}});
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> loge(-2.0, 2.5);
  for (int k = 0; k < 60; ++k) {
    store.submit_evidence(id, {{"log_e", otd::format_double(loge(rng))}});
    store.decide(id, rng() % 3 != 0);
  }
  otd::SeqEGuard g(0.1);
  std::optional<otd::LogValue> pending;
  const auto tr = store.trace(id, 0);
  for (const auto& ev : tr["events"]) {
    if (ev["kind"] == "evidence") {
      pending = otd::LogValue::from_log(otd::parse_double(ev["evidence"]["log_e"].get<std::string>()));
    } else if (ev["kind"] == "decision") {
      EXPECT_EQ(g.step(*pending, ev["include"].get<bool>()).bound, ev["d"].get<std::size_t>());
    }
  }
  EXPECT_EQ(g.state().bound, tr["d"].get<std::size_t>());
}

TEST_F(SessionTest, RestartRestoresState) {
  std::string id;
  json before;
  {
    otd::SessionStore store(dir_);
    id = store.create({{"method", "seq-e-guard"}, {"alpha", 0.1}, {"boosting", true}});
    for (int k = 0; k < 15; ++k) {
      store.submit_evidence(id, {{"x", k % 3 == 0 ? 0.2 : 3.1}, {"gro", {{"mu1", 3}, {"hedge", "tau-hat"}}}});
      store.decide(id, k % 4 != 1);
    }
    store.submit_evidence(id, {{"p", 0.01}, {"transform", {{"kind", "calibrator"}, {"x", 0.5}}}});
    before = store.trace(id, 0);
  }
  otd::SessionStore reopened(dir_);
  EXPECT_EQ(reopened.trace(id, 0), before);
  reopened.decide(id, true);
}

TEST_F(SessionTest, TornTailIsDropped) {
  std::string id, hash;
  {
    otd::SessionStore store(dir_);
    id = store.create(kSeq);
    replay_worked_example(store, id);
    hash = store.state_hash(id);
  }
  const std::string good = read_log(id);
  write_log(id, good + "0badc0de {\"kind\":\"evidence\",\"se");
  {
    otd::SessionStore reopened(dir_);
    EXPECT_EQ(reopened.state_hash(id), hash);
    EXPECT_EQ(reopened.bound(id), 2u);
  }
  EXPECT_EQ(read_log(id), good);
}

TEST_F(SessionTest, BadChecksumOnLastLineIsDropped) {
  std::string id;
  {
    otd::SessionStore store(dir_);
    id = store.create(kSeq);
    store.submit_evidence(id, {{"e", 3}});
  }
  std::string text = read_log(id);
  const auto last = text.rfind('\n', text.size() - 2) + 1;
  text[last] = text[last] == '0' ? '1' : '0';
  write_log(id, text);
  otd::SessionStore reopened(dir_);
  EXPECT_TRUE(reopened.trace(id, 0)["pending"].is_null());
  EXPECT_EQ(reopened.trace(id, 0)["head"], 1u);
}

TEST_F(SessionTest, MidFileCorruptionIsFatal) {
  std::string id;
  {
    otd::SessionStore store(dir_);
    id = store.create(kSeq);
    replay_worked_example(store, id);
  }
  std::string text = read_log(id);
  const auto second = text.find('\n') + 1;
  text[second + 20] = text[second + 20] == 'x' ? 'y' : 'x';
  write_log(id, text);
  EXPECT_THROW(otd::SessionStore reopened(dir_), otd::LogCorrupted);
}

TEST_F(SessionTest, SequenceGapIsFatal) {
  std::string id;
  {
    otd::SessionStore store(dir_);
    id = store.create(kSeq);
    replay_worked_example(store, id);
  }
  std::istringstream in(read_log(id));
  std::string out, line;
  for (int k = 0; std::getline(in, line); ++k) {
    if (k != 2) out += line + "\n";
  }
  write_log(id, out);
  EXPECT_THROW(otd::SessionStore reopened(dir_), otd::LogCorrupted);
}

TEST_F(SessionTest, MissingBoundChangeIsRestored) {
  std::string id;
  {
    otd::SessionStore store(dir_);
    id = store.create(kSeq);
    store.submit_evidence(id, {{"e", 25}});
    store.decide(id, true);
  }
  std::string text = read_log(id);
  ASSERT_NE(text.find("bound_change"), std::string::npos);
  text.erase(text.rfind('\n', text.size() - 2) + 1);
  write_log(id, text);
  otd::SessionStore reopened(dir_);
  const auto tr = reopened.trace(id, 0);
  EXPECT_EQ(tr["events"].back()["kind"], "bound_change");
  EXPECT_EQ(tr["d"], 1u);
}

TEST_F(SessionTest, IncompleteCreateIsDiscarded) {
  write_log("abcd", "");
  otd::SessionStore store(dir_);
  EXPECT_TRUE(store.list().empty());
  EXPECT_FALSE(fs::exists(log_path("abcd")));
}

TEST_F(SessionTest, ExportCsv) {
  otd::SessionStore store(dir_);
  const auto id = store.create(kSeq);
  replay_worked_example(store, id);
  std::istringstream in(store.export_csv(id));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,included,d,|S|,tdp_bound,log_statistic");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 5u);
}

TEST_F(SessionTest, OtherGuards) {
  otd::SessionStore store(dir_);
  const auto ex = store.create({{"method", "exe-guard"}, {"alpha", 0.1}});
  store.submit_evidence(ex, {{"e", 10}});
  EXPECT_EQ(store.decide(ex, true)["d"], 1u);
  const auto arb = store.create({{"method", "arbe-guard"}, {"alpha", 0.1}, {"gamma", "inverse-square"}});
  store.submit_evidence(arb, {{"e", 10}});
  EXPECT_EQ(store.decide(arb, true)["d"], 0u);
  store.submit_evidence(arb, {{"e", 40}});
  EXPECT_EQ(store.decide(arb, true)["d"], 1u);
  EXPECT_EQ(store.what_if(arb, {1, 2}).bound, 1u);
}

TEST(LineChecksum, KnownValue) {
  EXPECT_EQ(otd::line_checksum("123456789"), "cbf43926");
}
