#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "ct/bridge.hpp"
#include "http_fixture.hpp"

namespace ct::bridge {
namespace {

const Identity kSelf = identity_from_seed("bridge-self");

TEST(Bridge, UnconfiguredVerbsFail) {
  Bridge b;
  EXPECT_THROW(b.download_log_csv(), Unconfigured);
  EXPECT_THROW(b.set_power(true), Unconfigured);
  EXPECT_FALSE(b.status().at("configured").get<bool>());
}

TEST(Bridge, UpdateHardwareThenLog) {
  Bridge b;
  EXPECT_EQ(b.update_hardware(kSelf, HealthCode(0x0202)).text, "#C19:" + kSelf.public_id.str() + "0202");
  b.observe("#C19:8a04e24bcd91beea0001");
  b.observe("#C19:8a04e24bcd91beea0001");
  // Health update in place keeps the log.
  b.update_hardware(kSelf, HealthCode(0x0206));
  EXPECT_EQ(b.download_log_csv(), "8a04e24bcd91beea,0001,2\n");
  // A different identity re-provisions the token.
  b.update_hardware(identity_from_seed("other"), HealthCode(1));
  EXPECT_EQ(b.download_log_csv(), "");
}

TEST(Bridge, PowerCycle) {
  Bridge b;
  b.update_hardware(kSelf, HealthCode(1));
  b.observe("#C19:8a04e24bcd91beea0001");
  EXPECT_FALSE(b.set_power(false));
  EXPECT_THROW(b.download_log_csv(), TokenOff);
  EXPECT_TRUE(b.set_power(true));
  EXPECT_EQ(b.download_log_csv(), "");
}

class BridgeHttp : public ::testing::Test {
 protected:
  Bridge bridge_;
  ct::testing::LocalServer server_{[this](httplib::Server& s) { install_bridge_routes(s, bridge_); }};
};

TEST_F(BridgeHttp, ClientVerbs) {
  BridgeClient client(server_.url());
  EXPECT_THROW(client.download_log(), Unconfigured);
  EXPECT_EQ(client.update_hardware(kSelf.private_code, HealthCode(0x0202)),
            "#C19:" + kSelf.public_id.str() + "0202");
  EXPECT_EQ(client.observe("#C19:8a04e24bcd91beea0202"), "logged");
  EXPECT_EQ(client.observe("AirPods"), "ignored-malformed");
  EXPECT_EQ(client.observe(client.advertisement()), "ignored-self");
  EXPECT_EQ(client.download_log(), "8a04e24bcd91beea,0202,1\n");
  EXPECT_EQ(client.status().at("peers"), 1);
  EXPECT_FALSE(client.power(false));
  EXPECT_THROW(client.advertisement(), TokenOff);
  EXPECT_TRUE(client.power(true));
  EXPECT_EQ(client.download_log(), "");
}

TEST_F(BridgeHttp, IdentityNewAndCors) {
  httplib::Client raw(server_.url());
  auto res = raw.Post("/identity/new", R"({"seed": "s1"})", "application/json");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200);
  const auto j = nlohmann::json::parse(res->body);
  const auto expect = identity_from_seed("s1");
  EXPECT_EQ(j.at("private_code"), expect.private_code.str());
  EXPECT_EQ(j.at("public_id"), expect.public_id.str());
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");

  res = raw.Post("/identity/new", "", "application/json");
  ASSERT_TRUE(res);
  const auto fresh = nlohmann::json::parse(res->body);
  EXPECT_TRUE(verify_public_id(fresh.at("private_code").get<std::string>(), fresh.at("public_id").get<std::string>()));

  auto pre = raw.Options("/update-hardware");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);
}

TEST_F(BridgeHttp, UpdateHardwareValidation) {
  httplib::Client raw(server_.url());
  nlohmann::json body{{"private_code", kSelf.private_code.str()}, {"health", "0202"}, {"public_id", "2ef94e20ba20beea"}};
  auto res = raw.Post("/update-hardware", body.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);

  body["public_id"] = kSelf.public_id.str();
  body["health"] = "02020";
  res = raw.Post("/update-hardware", body.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);

  body["health"] = "0202";
  res = raw.Post("/update-hardware", body.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(nlohmann::json::parse(res->body).at("advertisement"), "#C19:" + kSelf.public_id.str() + "0202");

  res = raw.Post("/power", R"({"state": "sideways"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
}

}  // namespace
}  // namespace ct::bridge
