#include <thread>

#include <doctest.h>
#include <httplib.h>

#include "camscope/cam.hpp"
#include "camscope/http_server.hpp"
#include "camscope/service.hpp"
#include "camscope/synthetic.hpp"
#include "camscope/train.hpp"
#include "test_support.hpp"

using namespace camscope;
using namespace camscope::service;
using nlohmann::json;

namespace {

struct Fixture {
  nn::Model model;
  data::Dataset dataset;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    data::SyntheticSpec spec;
    spec.per_class = 20;
    spec.length = 32;
    spec.seed = 3;
    auto syn = data::make_motif_dataset(spec);
    nn::TrainOptions opts;
    opts.epochs = 20;
    opts.batch_size = 16;
    opts.adam.lr = 1e-2;
    opts.seed = 1;
    const auto examples = syn.dataset.examples();
    auto result = nn::train(testing::small_config(32, {4, 8}, 3), examples, opts);
    return Fixture{std::move(result.model), std::move(syn.dataset)};
  }();
  return f;
}

Service make_service() { return Service(fixture().model, fixture().dataset); }

json body_of(const Response& r) { return json::parse(r.body); }

void check_api_error(const Response& r, int status, const std::string& code) {
  CHECK(r.status == status);
  const auto j = body_of(r);
  CHECK(j.size() == 3);
  CHECK(j["code"] == code);
  CHECK(j["message"].is_string());
  CHECK(j["http_status"] == status);
}

std::size_t first_class(Service& s) { return body_of(s.handle("GET", "/api/classes", {}, "")).at(0)["class_index"]; }

}  // namespace

TEST_SUITE("service routing") {
  TEST_CASE("no model loaded") {
    Service empty;
    CHECK_FALSE(empty.loaded());
    check_api_error(empty.handle("GET", "/api/classes", {}, ""), 409, "no_model");
    check_api_error(empty.handle("GET", "/api/classes/0/cam", {}, ""), 409, "no_model");
    check_api_error(empty.handle("POST", "/api/sessions", {}, R"({"class_index": 0})"), 409, "no_model");
  }

  TEST_CASE("classes are listed by index with their counts") {
    auto s = make_service();
    const auto j = body_of(s.handle("GET", "/api/classes", {}, ""));
    REQUIRE(j.is_array());
    std::size_t total = 0;
    for (std::size_t i = 0; i < j.size(); ++i) {
      CHECK(j[i].size() == 3);
      CHECK(j[i]["name"].is_string());
      CHECK(j[i]["n_samples"].get<std::size_t>() >= 1);
      if (i > 0) CHECK(j[i]["class_index"] > j[i - 1]["class_index"]);
      total += j[i]["n_samples"].get<std::size_t>();
    }
    CHECK(total == fixture().dataset.samples.size());
    CHECK(j[0]["name"].get<std::string>().rfind("class-", 0) == 0);
  }

  TEST_CASE("empty predicted class is omitted and answers 404") {
    data::Dataset ds = fixture().dataset;
    Service s(nn::Model::zeros(fixture().model.config), ds);
    const auto j = body_of(s.handle("GET", "/api/classes", {}, ""));
    REQUIRE(j.size() == 1);
    CHECK(j[0]["class_index"] == 0);
    check_api_error(s.handle("GET", "/api/classes/1/cam", {}, ""), 404, "empty_class");
    check_api_error(s.handle("GET", "/api/classes/3/cam", {}, ""), 404, "not_found");
  }

  TEST_CASE("class cam defaults, determinism and method independence") {
    auto s = make_service();
    const auto c = first_class(s);
    const auto path = "/api/classes/" + std::to_string(c) + "/cam";
    const auto a = s.handle("GET", path, {}, "");
    const auto b = s.handle("GET", path, {{"agg", "mean"}, {"var", "entropy"}}, "");
    CHECK(a.status == 200);
    CHECK(a.body == b.body);
    const auto j = body_of(a);
    CHECK(j["agg_method"] == "mean");
    CHECK(j["var_method"] == "entropy");
    CHECK(j["impact"].size() == 32);
    for (const char* var : {"variance", "stddev", "gini"}) {
      const auto other = body_of(s.handle("GET", path, {{"agg", "mean"}, {"var", var}}, ""));
      CHECK(other["impact"] == j["impact"]);
    }
    check_api_error(s.handle("GET", path, {{"agg", "mode"}}, ""), 400, "unknown_method");
    check_api_error(s.handle("GET", path, {{"var", "Entropy"}}, ""), 400, "unknown_method");
    check_api_error(s.handle("GET", "/api/classes/x/cam", {}, ""), 400, "invalid_argument");
  }

  TEST_CASE("histograms") {
    auto s = make_service();
    const auto c = first_class(s);
    const auto base = "/api/classes/" + std::to_string(c) + "/features/";
    const auto h = body_of(s.handle("GET", base + "5/histogram", {}, ""));
    CHECK(h["feature_index"] == 5);
    CHECK(h["counts"].size() == 32);
    std::size_t sum = 0;
    for (const auto& n : h["counts"]) sum += n.get<std::size_t>();
    const auto classes = body_of(s.handle("GET", "/api/classes", {}, ""));
    CHECK(sum == classes[0]["n_samples"]);
    const auto one = body_of(s.handle("GET", base + "5/histogram", {{"bins", "1"}}, ""));
    CHECK(one["counts"] == json::array({sum}));
    check_api_error(s.handle("GET", base + "32/histogram", {}, ""), 404, "not_found");
    check_api_error(s.handle("GET", base + "1/histogram", {{"bins", "0"}}, ""), 400, "invalid_argument");
    check_api_error(s.handle("GET", base + "1/histogram", {{"bins", "-2"}}, ""), 400, "invalid_argument");
    check_api_error(s.handle("GET", base + "1/histogram", {{"session", "nope"}}, ""), 404, "not_found");
  }

  TEST_CASE("sample cam matches the cam module") {
    auto s = make_service();
    const auto& sample = fixture().dataset.samples[7];
    const auto r = s.handle("GET", "/api/samples/" + sample.sample_id + "/cam", {}, "");
    CHECK(r.status == 200);
    CHECK(r.body == cam::to_json(cam::cam_for_prediction(fixture().model, sample.input, sample.sample_id)).dump());
    const auto j = body_of(r);
    CHECK(j.contains("raw"));
    CHECK(j.contains("normalized"));
    check_api_error(s.handle("GET", "/api/samples/unknown/cam", {}, ""), 404, "not_found");
  }

  TEST_CASE("session lifecycle") {
    auto s = make_service();
    const auto c = first_class(s);
    const auto created = s.handle("POST", "/api/sessions", {}, json{{"class_index", c}}.dump());
    CHECK(created.status == 201);
    const std::string id = body_of(created)["session_id"];
    const auto path = "/api/sessions/" + id;

    const auto initial = body_of(s.handle("GET", path, {}, ""));
    CHECK(initial["filters"].empty());
    const auto global = s.handle("GET", "/api/classes/" + std::to_string(c) + "/cam", {}, "");
    CHECK(s.handle("GET", path + "/cam", {}, "").body == global.body);

    // DELETE on an empty stack is a no-op
    const auto noop = s.handle("DELETE", path + "/filters/last", {}, "");
    CHECK(noop.status == 200);
    auto noop_body = body_of(noop);
    CHECK(noop_body["cam"] == body_of(global));
    noop_body.erase("cam");
    CHECK(noop_body == initial);

    const auto filtered = s.handle("POST", path + "/filters", {}, R"({"feature_index": 3, "lo": -1, "hi": 1})");
    CHECK(filtered.status == 200);
    CHECK(body_of(filtered)["filters"].size() == 1);
    CHECK(body_of(filtered)["cam"] == body_of(s.handle("GET", path + "/cam", {}, "")));
    const auto n_active = body_of(filtered)["active_ids"].size();
    CHECK(body_of(filtered)["cam"]["n_samples"] == n_active);
    check_api_error(s.handle("POST", path + "/filters", {{"agg", "nope"}}, R"({"feature_index": 3, "lo": -1, "hi": 1})"),
                    400, "unknown_method");
    CHECK(body_of(s.handle("GET", path, {}, ""))["filters"].size() == 1);

    const auto before = s.handle("GET", path, {}, "").body;
    const auto rejected = s.handle("POST", path + "/filters", {}, R"({"feature_index": 3, "lo": 5, "hi": 6})");
    check_api_error(rejected, 422, "empty_selection");
    CHECK(s.handle("GET", path, {}, "").body == before);

    check_api_error(s.handle("POST", path + "/filters", {}, R"({"feature_index": 3, "lo": 0.5})"), 400,
                    "invalid_argument");
    check_api_error(s.handle("POST", path + "/filters", {}, R"({"feature_index": 3, "lo": 0.5, "hi": 0.1})"), 400,
                    "invalid_argument");
    check_api_error(s.handle("POST", path + "/filters", {}, "{not json"), 400, "invalid_argument");

    const auto put1 = s.handle("PUT", path + "/annotations/4", {}, R"({"status": "interesting"})");
    const auto put2 = s.handle("PUT", path + "/annotations/4", {}, R"({"status": "interesting"})");
    CHECK(put1.status == 200);
    CHECK(put1.body == put2.body);
    CHECK(body_of(put1)["annotations"][0] == json{{"feature_index", 4}, {"status", "interesting"}});
    const auto cleared = body_of(s.handle("PUT", path + "/annotations/4", {}, R"({"status": null})"));
    CHECK(cleared["annotations"].empty());
    check_api_error(s.handle("PUT", path + "/annotations/4", {}, R"({"status": "odd"})"), 400, "invalid_argument");
    check_api_error(s.handle("PUT", path + "/annotations/99", {}, R"({"status": "interesting"})"), 404,
                    "index_out_of_range");

    const auto popped = body_of(s.handle("DELETE", path + "/filters/last", {}, ""));
    CHECK(popped["filters"].empty());

    check_api_error(s.handle("GET", "/api/sessions/zzz", {}, ""), 404, "not_found");
    check_api_error(s.handle("POST", "/api/sessions", {}, R"({"class_index": 17})"), 404, "not_found");
  }

  TEST_CASE("session histogram belongs to its class") {
    auto s = make_service();
    const auto classes = body_of(s.handle("GET", "/api/classes", {}, ""));
    REQUIRE(classes.size() >= 2);
    const std::size_t a = classes[0]["class_index"], b = classes[1]["class_index"];
    const std::string id = body_of(s.handle("POST", "/api/sessions", {}, json{{"class_index", a}}.dump()))["session_id"];
    const auto ok = s.handle("GET", "/api/classes/" + std::to_string(a) + "/features/0/histogram", {{"session", id}}, "");
    CHECK(ok.status == 200);
    check_api_error(s.handle("GET", "/api/classes/" + std::to_string(b) + "/features/0/histogram", {{"session", id}}, ""),
                    400, "invalid_argument");
  }

  TEST_CASE("unknown routes") {
    auto s = make_service();
    check_api_error(s.handle("GET", "/api/nothing", {}, ""), 404, "not_found");
    check_api_error(s.handle("PATCH", "/api/classes", {}, ""), 404, "not_found");
    check_api_error(s.handle("GET", "/other", {}, ""), 404, "not_found");
  }

  TEST_CASE("duplicate ids and length mismatch are refused at construction") {
    auto ds = fixture().dataset;
    ds.samples[1].sample_id = ds.samples[0].sample_id;
    CHECK_THROWS_AS(Service(fixture().model, ds), Error);
    auto short_ds = fixture().dataset;
    short_ds.input_length = 31;
    CHECK_THROWS_AS(Service(fixture().model, short_ds), Error);
  }

  TEST_CASE("independent sessions mutate concurrently") {
    auto s = make_service();
    const auto c = first_class(s);
    std::vector<std::string> ids;
    for (int i = 0; i < 4; ++i)
      ids.push_back(body_of(s.handle("POST", "/api/sessions", {}, json{{"class_index", c}}.dump()))["session_id"]);
    std::vector<std::thread> workers;
    for (const auto& id : ids) {
      workers.emplace_back([&s, id] {
        for (int k = 0; k < 50; ++k) {
          s.handle("POST", "/api/sessions/" + id + "/filters", {}, R"({"feature_index": 1, "lo": -1, "hi": 1})");
          s.handle("GET", "/api/sessions/" + id + "/cam", {}, "");
          s.handle("DELETE", "/api/sessions/" + id + "/filters/last", {}, "");
        }
      });
    }
    for (auto& w : workers) w.join();
    for (const auto& id : ids) CHECK(body_of(s.handle("GET", "/api/sessions/" + id, {}, ""))["filters"].empty());
  }
}

TEST_SUITE("service over http") {
  TEST_CASE("requests round-trip through the listener") {
    auto s = make_service();
    HttpOptions opts;
    opts.port = 0;
    HttpServer server(s, opts);
    REQUIRE(server.bind());
    std::thread thread([&] { server.listen(); });
    server.wait_until_ready();

    httplib::Client client("127.0.0.1", server.port());
    const auto classes = client.Get("/api/classes");
    REQUIRE(classes);
    CHECK(classes->status == 200);
    CHECK(classes->get_header_value("Content-Type") == "application/json");
    CHECK(classes->body == s.handle("GET", "/api/classes", {}, "").body);

    const auto c = json::parse(classes->body)[0]["class_index"].get<std::size_t>();
    const auto cam1 = client.Get("/api/classes/" + std::to_string(c) + "/cam?agg=median&var=gini");
    const auto cam2 = client.Get("/api/classes/" + std::to_string(c) + "/cam?agg=median&var=gini");
    REQUIRE(cam1);
    CHECK(cam1->body == cam2->body);
    CHECK(json::parse(cam1->body)["agg_method"] == "median");

    const auto& id = fixture().dataset.samples[0].sample_id;
    const auto sample = client.Get("/api/samples/" + id + "/cam");
    REQUIRE(sample);
    CHECK(sample->status == 200);

    const auto created = client.Post("/api/sessions", json{{"class_index", c}}.dump(), "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    const std::string sid = json::parse(created->body)["session_id"];
    const auto rejected =
        client.Post("/api/sessions/" + sid + "/filters", R"({"feature_index": 0, "lo": 2, "hi": 3})", "application/json");
    REQUIRE(rejected);
    CHECK(rejected->status == 422);
    CHECK(json::parse(rejected->body)["code"] == "empty_selection");
    const auto put = client.Put("/api/sessions/" + sid + "/annotations/2", R"({"status": "irrelevant"})",
                                "application/json");
    REQUIRE(put);
    CHECK(put->status == 200);
    const auto del = client.Delete("/api/sessions/" + sid + "/filters/last");
    REQUIRE(del);
    CHECK(del->status == 200);

    const auto missing = client.Get("/nowhere");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    CHECK(json::parse(missing->body)["code"] == "not_found");
    const auto patch = client.Patch("/api/classes", "{}", "application/json");
    REQUIRE(patch);
    CHECK(json::parse(patch->body).contains("code"));

    server.stop();
    thread.join();
  }

  TEST_CASE("static assets are served from the ui directory") {
    testing::TempDir dir;
    testing::write_file(dir / "index.html", std::string("<html>ui</html>"));
    auto s = make_service();
    HttpOptions opts;
    opts.port = 0;
    opts.ui_dir = dir.path();
    HttpServer server(s, opts);
    REQUIRE(server.bind());
    std::thread thread([&] { server.listen(); });
    server.wait_until_ready();
    httplib::Client client("127.0.0.1", server.port());
    const auto page = client.Get("/index.html");
    REQUIRE(page);
    CHECK(page->body == "<html>ui</html>");
    CHECK(client.Get("/api/classes")->status == 200);
    server.stop();
    thread.join();
  }

  TEST_CASE("a taken port fails to bind") {
    auto s = make_service();
    HttpOptions opts;
    opts.port = 0;
    HttpServer first(s, opts);
    REQUIRE(first.bind());
    HttpOptions same;
    same.port = first.port();
    HttpServer second(s, same);
    CHECK_FALSE(second.bind());
  }
}
