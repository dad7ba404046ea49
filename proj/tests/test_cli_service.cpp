#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "phantom.hpp"
#include "temp_dir.hpp"
#include "vesselseg/dataset_io.hpp"
#include "vesselseg/image_io.hpp"
#include "vesselseg/json_io.hpp"
#include "vesselseg/service.hpp"

namespace vesselseg {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult cli(std::vector<std::string> args) {
    args.insert(args.begin(), "vesselseg");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string text_of(const fs::path& p) {
    const auto bytes = read_file(p);
    return {bytes.begin(), bytes.end()};
}

std::string png_of(const BinaryMask& m) {
    const auto bytes = encode_image(m);
    return {bytes.begin(), bytes.end()};
}

std::span<const std::uint8_t> bytes_of(const std::string& s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

class ScopedEnv {
public:
    ScopedEnv(const char* name, const char* value) : name_(name) {
        if (const char* old = std::getenv(name)) old_ = old;
        ::setenv(name, value, 1);
    }
    ~ScopedEnv() {
        if (old_) {
            ::setenv(name_, old_->c_str(), 1);
        } else {
            ::unsetenv(name_);
        }
    }

private:
    const char* name_;
    std::optional<std::string> old_;
};

// ---- CLI ----

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        phantom_ = testing::make_vessel_phantom(96, 11);
        image_ = dir_.path() / "img.png";
        truth_ = dir_.path() / "truth.png";
        save_image(phantom_.image, image_);
        save_image(phantom_.truth, truth_);
    }
    fs::path file(const std::string& name) const { return dir_.path() / name; }

    TempDir dir_;
    testing::Phantom phantom_;
    fs::path image_, truth_;
};

TEST_F(CliTest, SegmentFrangiWritesMask) {
    const auto r = cli({"segment", "frangi", "--in", image_, "--out", file("mask.png"), "--sigmas", "1,2,3",
                        "--threshold", "0.05"});
    ASSERT_EQ(r.code, 0) << r.err;
    FrangiParams p;
    p.sigmas = {1, 2, 3};
    p.threshold = 0.05;
    EXPECT_EQ(load_mask(file("mask.png")), frangi_segment(load_image(image_), p));
}

TEST_F(CliTest, UsageErrorsExitTwoWithSynopsis) {
    auto r = cli({"segment", "frangi", "--in", image_, "--out", file("m.png"), "--bogus", "1"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
    EXPECT_EQ(cli({}).code, 2);
    EXPECT_EQ(cli({"segment"}).code, 2);
    EXPECT_EQ(cli({"segment", "frangi", "--in", image_}).code, 2);
    EXPECT_EQ(cli({"segment", "frangi", "--in", file("missing.png"), "--out", file("m.png")}).code, 2);
    EXPECT_EQ(cli({"segment", "connectivity", "--in", image_, "--out", file("m.png"), "--variant", "zigzag"}).code, 2);
    EXPECT_EQ(cli({"evaluate", "--pred", truth_}).code, 2);
    EXPECT_EQ(cli({"dataset", "build", "--image", image_, "--out", file("d.arff")}).code, 2);
    EXPECT_EQ(cli({"frobnicate"}).code, 2);
    EXPECT_FALSE(fs::exists(file("m.png")));
}

TEST_F(CliTest, HelpExitsZero) {
    const auto r = cli({"segment", "connectivity", "--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("--seed-threshold"), std::string::npos);
}

TEST_F(CliTest, DomainErrorsExitOne) {
    auto r = cli({"segment", "frangi", "--in", image_, "--out", file("m.png"), "--sigmas", "40"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("ImageTooSmall"), std::string::npos);
    EXPECT_EQ(cli({"segment", "frangi", "--in", image_, "--out", file("m.png"), "--sigmas", "3,1"}).code, 1);
    EXPECT_EQ(cli({"train", "--dataset", image_, "--out", file("m.json")}).code, 1);
    EXPECT_EQ(cli({"train", "--dataset", truth_, "--model", "knn", "--k", "4", "--out", file("m.json")}).code, 1);

    const BinaryMask small(5, 5);
    save_image(small, file("small.png"));
    EXPECT_EQ(cli({"evaluate", "--pred", file("small.png"), "--truth", truth_}).code, 1);
}

TEST_F(CliTest, EvaluateIdenticalMasksReportsDiceOne) {
    const auto r = cli({"evaluate", "--pred", truth_, "--truth", truth_});
    ASSERT_EQ(r.code, 0) << r.err;
    const Json j = Json::parse(r.out);
    EXPECT_EQ(j.at("dice").get<double>(), 1.0);
    EXPECT_EQ(j.at("confusion").at("tp").get<std::uint64_t>(), phantom_.truth.count());
}

TEST_F(CliTest, ConnectivityDefaultsAreModuleDefaults) {
    ASSERT_EQ(cli({"segment", "connectivity", "--in", image_, "--out", file("d.png")}).code, 0);
    EXPECT_EQ(load_mask(file("d.png")), connectivity_filter(phantom_.image, ConnectivityParams{}));
}

TEST_F(CliTest, ConnectivityFlagsReachEveryParameter) {
    ConnectivityParams p;
    p.frangi.sigmas = {1.5, 2.5};
    p.frangi.beta = 0.7;
    p.frangi.c = 20;
    p.seed_threshold = 0.4;
    p.variant = GrowthVariant::Radial;
    p.growth.tolerance = 0.07;
    p.growth.neighborhood = Neighborhood::Four;
    p.growth.radius = 2;
    p.growth.reference = GrowthReference::SeedValue;
    p.growth.max_pixels = 400;
    p.cleanup = CleanupSpec{CleanupSpec::Order::Closing, StructuringElement(ElementShape::Disk, 1)};
    const auto r = cli({"segment", "connectivity", "--in", image_, "--out", file("c.png"), "--sigmas", "1.5,2.5",
                        "--beta", "0.7", "--c", "20", "--seed-threshold", "0.4", "--variant", "radial",
                        "--tolerance", "0.07", "--neighborhood", "4", "--radius", "2", "--reference", "seed",
                        "--max-pixels", "400", "--cleanup", "closing", "--element", "disk", "--element-radius", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(load_mask(file("c.png")), connectivity_filter(phantom_.image, p));
}

TEST_F(CliTest, DatasetTrainPredictChain) {
    ScopedEnv epoch("SOURCE_DATE_EPOCH", "1700000000");
    auto r = cli({"dataset", "build", "--image", image_, "--truth", truth_, "--sampling", "balanced", "--n", "60",
                  "--seed", "5", "--scales", "1,2", "--window", "3", "--out", file("ds.arff")});
    ASSERT_EQ(r.code, 0) << r.err;
    const LabeledImage pair{phantom_.image, phantom_.truth, "img"};
    FeatureConfig cfg;
    cfg.scales = {1, 2};
    cfg.window = 3;
    const Dataset expected = build_dataset(std::span(&pair, 1), cfg, Sampling::balanced(60, 5));
    EXPECT_EQ(text_of(file("ds.arff")), to_arff(expected));

    ASSERT_EQ(cli({"dataset", "build", "--image", image_, "--truth", truth_, "--sampling", "balanced", "--n", "60",
                   "--seed", "5", "--scales", "1,2", "--window", "3", "--out", file("ds.csv")})
                  .code,
              0);
    EXPECT_EQ(text_of(file("ds.csv")), to_csv(expected));

    r = cli({"train", "--dataset", file("ds.arff"), "--model", "tree", "--max-depth", "4", "--out", file("m.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const TrainedModel model = train(from_arff(to_arff(expected)), ModelKind::tree(4));
    EXPECT_EQ(text_of(file("m.json")), model_to_json(model));

    r = cli({"predict", "--model", file("m.json"), "--in", image_, "--out", file("p.png"), "--threshold", "0.6"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(load_mask(file("p.png")), predict_mask(model, phantom_.image, 0.6).mask);

    r = cli({"evaluate", "--model", file("m.json"), "--image", image_, "--truth", truth_});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_DOUBLE_EQ(Json::parse(r.out).at("dice").get<double>(),
                     evaluate_masks(predict_mask(model, phantom_.image).mask, phantom_.truth).dice);
}

TEST_F(CliTest, ProjectNewTrainAndExport) {
    auto r = cli({"project", "new", "--image", image_, "--name", "demo", "--out", file("p.vsproj")});
    ASSERT_EQ(r.code, 0) << r.err;
    Project p = load_project(file("p.vsproj"));
    EXPECT_EQ(p.name, "demo");
    EXPECT_EQ(r.out, p.id + "\n");
    apply_edit(p, EditOp{0, ReplaceLayerOp{phantom_.truth}});
    save_project(p, file("p.vsproj"));

    r = cli({"project", "export", "--project", file("p.vsproj"), "--out-dir", file("export")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(load_image(file("export") / "image.png"), phantom_.image);
    EXPECT_EQ(load_mask(file("export") / "layer_0.png"), phantom_.truth);
    const Json summary = Json::parse(text_of(file("export") / "project.json"));
    EXPECT_EQ(summary.at("layers").size(), 1u);

    ASSERT_EQ(cli({"project", "export", "--project", file("p.vsproj"), "--layer", "manual", "--out", file("l.png")}).code, 0);
    EXPECT_EQ(load_mask(file("l.png")), phantom_.truth);

    r = cli({"train", "--project", file("p.vsproj"), "--sampling", "balanced", "--n", "40", "--out", file("m.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(load_model(file("m.json")).meta.sources, std::vector<std::string>{p.id});
}

// ---- configuration and jobs ----

TEST(AppConfigTest, FileValuesEnvironmentAndValidation) {
    TempDir dir;
    const Json j{{"storage_root", (dir.path() / "store").string()},
                 {"listen_address", "0.0.0.0:9000"},
                 {"workers", 3},
                 {"frangi", {{"sigmas", {1.0, 2.0}}}},
                 {"connectivity", {{"seed_threshold", 0.3}}},
                 {"features", {{"window", 7}}}};
    AppConfig cfg = AppConfig::from_json(j);
    EXPECT_EQ(cfg.host_port(), std::make_pair(std::string("0.0.0.0"), 9000));
    EXPECT_EQ(cfg.worker_count(), 3u);
    EXPECT_EQ(cfg.frangi.sigmas, (std::vector<double>{1.0, 2.0}));
    EXPECT_EQ(cfg.frangi.beta, FrangiParams{}.beta);
    EXPECT_EQ(cfg.connectivity.seed_threshold, 0.3);
    EXPECT_EQ(cfg.features.window, 7);
    {
        ScopedEnv storage("VESSELSEG_STORAGE", (dir.path() / "env").c_str());
        ScopedEnv listen("VESSELSEG_LISTEN", "127.0.0.1:0");
        cfg.apply_environment();
    }
    EXPECT_EQ(cfg.storage_root, dir.path() / "env");
    EXPECT_EQ(cfg.listen_address, "127.0.0.1:0");
    cfg.prepare_storage();
    EXPECT_TRUE(fs::is_directory(dir.path() / "env" / "projects"));
    EXPECT_TRUE(fs::is_directory(dir.path() / "env" / "models"));
    EXPECT_TRUE(fs::is_directory(dir.path() / "env" / "datasets"));

    auto code_of = [](const Json& bad) {
        try {
            AppConfig::from_json(bad);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::NotFound;
    };
    EXPECT_EQ(code_of(Json{{"listen_address", "nohost"}}), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of(Json{{"listen_address", "h:99999"}}), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of(Json{{"frangi", {{"beta", -1}}}}), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of(Json{{"workers", "many"}}), ErrorCode::InvalidArgument);
}

TEST(JobQueueTest, StatusTransitionsAndFailures) {
    JobQueue q(2);
    const auto ok = q.submit("train", {{"x", 1}}, [] { return Json{{"answer", 42}}; });
    const auto bad = q.submit("predict", {}, []() -> Json { throw Error(ErrorCode::SingleClassDataset, "one class"); });
    const auto r1 = q.wait(ok);
    const auto r2 = q.wait(bad);
    ASSERT_TRUE(r1 && r2);
    EXPECT_EQ(r1->status, JobStatus::Done);
    EXPECT_EQ(r1->result.at("answer"), 42);
    EXPECT_EQ(r1->parameters.at("x"), 1);
    EXPECT_EQ(r2->status, JobStatus::Failed);
    EXPECT_NE(r2->error.find("one class"), std::string::npos);
    EXPECT_FALSE(q.get("nope").has_value());
    EXPECT_TRUE(q.remove(ok));
    EXPECT_FALSE(q.get(ok).has_value());
}

TEST(JobQueueTest, PoolBoundsConcurrency) {
    std::atomic<int> running{0};
    std::atomic<int> peak{0};
    std::vector<std::string> ids;
    {
        JobQueue q(2);
        for (int i = 0; i < 8; ++i) {
            ids.push_back(q.submit("train", {}, [&] {
                const int now = ++running;
                int seen = peak.load();
                while (now > seen && !peak.compare_exchange_weak(seen, now)) {
                }
                std::this_thread::sleep_for(std::chrono::milliseconds(10));
                --running;
                return Json();
            }));
        }
        for (const auto& id : ids) EXPECT_EQ(q.wait(id)->status, JobStatus::Done);
    }
    EXPECT_LE(peak.load(), 2);
    EXPECT_GE(peak.load(), 1);
}

TEST(HttpStatusTest, ErrorCodeMapping) {
    EXPECT_EQ(http_status(ErrorCode::NotFound), 404);
    EXPECT_EQ(http_status(ErrorCode::DimensionMismatch), 422);
    EXPECT_EQ(http_status(ErrorCode::InvalidArgument), 422);
    EXPECT_EQ(http_status(ErrorCode::LayerLocked), 409);
    EXPECT_EQ(http_status(ErrorCode::CorruptProject), 500);
}

// ---- HTTP service ----

class ServiceTest : public ::testing::Test {
protected:
    void SetUp() override {
        AppConfig cfg;
        cfg.storage_root = dir_.path() / "store";
        cfg.listen_address = "127.0.0.1:0";
        cfg.workers = 2;
        cfg.static_root = dir_.path() / "www";
        fs::create_directories(*cfg.static_root);
        const std::string index = "<html>vesselseg</html>";
        write_file(*cfg.static_root / "index.html", bytes_of(index));
        service_ = std::make_unique<Service>(cfg);
        port_ = service_->start();
        client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
        phantom_ = testing::make_vessel_phantom(96, 21);
    }
    void TearDown() override {
        client_.reset();
        service_.reset();
    }

    std::string create_project(const RasterImage& img, const std::string& name = "demo") {
        const auto png = encode_image(img);
        httplib::MultipartFormDataItems items{{"image", std::string(png.begin(), png.end()), "img.png", "image/png"},
                                              {"name", name, "", ""}};
        const auto res = client_->Post("/projects", items);
        EXPECT_TRUE(res);
        EXPECT_EQ(res->status, 201) << res->body;
        return Json::parse(res->body).at("id").get<std::string>();
    }

    Json get_json(const std::string& path, int expected = 200) {
        const auto res = client_->Get(path);
        EXPECT_TRUE(res);
        EXPECT_EQ(res->status, expected) << path << ": " << res->body;
        return Json::parse(res->body);
    }

    httplib::Result post_json(const std::string& path, const Json& body) {
        return client_->Post(path, body.dump(), "application/json");
    }

    httplib::Result put_mask(const std::string& project, int layer, const BinaryMask& m,
                             const std::string& if_match = "") {
        httplib::Headers headers;
        if (!if_match.empty()) headers.emplace("If-Match", if_match);
        return client_->Put("/projects/" + project + "/layers/" + std::to_string(layer), headers, png_of(m), "image/png");
    }

    Json wait_job(const std::string& id) {
        for (int i = 0; i < 600; ++i) {
            const Json j = get_json("/jobs/" + id);
            const std::string status = j.at("status");
            if (status == "done" || status == "failed") return j;
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
        ADD_FAILURE() << "job " << id << " did not finish";
        return {};
    }

    TempDir dir_;
    std::unique_ptr<Service> service_;
    std::unique_ptr<httplib::Client> client_;
    int port_ = 0;
    testing::Phantom phantom_;
};

TEST_F(ServiceTest, UnknownIdsAre404) {
    for (const std::string path : {"/projects/nonexistent", "/projects/nonexistent/image", "/projects/nonexistent/layers/0",
                                   "/models/nonexistent", "/datasets/nonexistent/arff", "/jobs/nonexistent",
                                   "/projects/..%2F..%2Fetc"}) {
        const auto res = client_->Get(path);
        ASSERT_TRUE(res);
        EXPECT_EQ(res->status, 404) << path;
    }
    EXPECT_EQ(post_json("/projects/nonexistent/filters/frangi", Json::object())->status, 404);
    EXPECT_EQ(put_mask("nonexistent", 0, BinaryMask(4, 4))->status, 404);
    EXPECT_EQ(post_json("/models", {{"dataset", "nonexistent"}})->status, 404);
    EXPECT_EQ(post_json("/datasets", {{"projects", {"nonexistent"}}})->status, 404);
    EXPECT_EQ(client_->Delete("/projects/nonexistent")->status, 404);

    const std::string id = create_project(phantom_.image);
    EXPECT_EQ(client_->Get("/projects/" + id + "/layers/1")->status, 404);
    EXPECT_EQ(client_->Get("/projects/" + id + "/layers/x")->status, 404);
    EXPECT_EQ(post_json("/models/nonexistent/predict", {{"project", id}})->status, 404);
}

TEST_F(ServiceTest, CreateAndReadProject) {
    const std::string id = create_project(phantom_.image, "fundus");
    const Json summary = get_json("/projects/" + id);
    EXPECT_EQ(summary.at("id"), id);
    EXPECT_EQ(summary.at("name"), "fundus");
    EXPECT_EQ(summary.at("width"), 96);
    EXPECT_EQ(summary.at("layers").size(), 1u);
    EXPECT_EQ(summary.at("layers")[0].at("provenance").at("type"), "manual");

    const auto image = client_->Get("/projects/" + id + "/image");
    ASSERT_EQ(image->status, 200);
    EXPECT_EQ(decode_image(bytes_of(image->body)), phantom_.image);
    const auto layer = client_->Get("/projects/" + id + "/layers/0");
    ASSERT_EQ(layer->status, 200);
    EXPECT_EQ(decode_mask(bytes_of(layer->body)), BinaryMask(96, 96));

    const auto archive = client_->Get("/projects/" + id + "/archive");
    ASSERT_EQ(archive->status, 200);
    EXPECT_EQ(project_from_archive(bytes_of(archive->body)), service_->storage().load_project(id));
    EXPECT_EQ(get_json("/projects").at("projects"), Json::array({id}));
}

TEST_F(ServiceTest, BadUploadsAre422) {
    auto res = client_->Post("/projects", "not an image", "application/octet-stream");
    EXPECT_EQ(res->status, 422);
    res = client_->Post("/projects", "", "application/octet-stream");
    EXPECT_EQ(res->status, 422);
    httplib::MultipartFormDataItems items{{"other", "x", "x.png", "image/png"}};
    EXPECT_EQ(client_->Post("/projects", items)->status, 422);
}

TEST_F(ServiceTest, PutLayerReplacesMaskAndRejectsWrongDimensions) {
    const std::string id = create_project(phantom_.image);
    const auto before = service_->storage().project_bytes(id);

    auto res = put_mask(id, 0, BinaryMask(95, 96));
    EXPECT_EQ(res->status, 422);
    EXPECT_EQ(Json::parse(res->body).at("error"), "DimensionMismatch");
    res = client_->Put("/projects/" + id + "/layers/0", "garbage", "image/png");
    EXPECT_EQ(res->status, 422);
    EXPECT_EQ(service_->storage().project_bytes(id), before);

    res = put_mask(id, 0, phantom_.truth);
    ASSERT_EQ(res->status, 200) << res->body;
    const auto layer = client_->Get("/projects/" + id + "/layers/0");
    EXPECT_EQ(decode_mask(bytes_of(layer->body)), phantom_.truth);
    EXPECT_EQ(get_json("/projects/" + id).at("etag"), Json::parse(res->body).at("etag"));
}

TEST_F(ServiceTest, InvalidParametersAre422) {
    const std::string id = create_project(phantom_.image);
    const std::string base = "/projects/" + id + "/filters/";
    EXPECT_EQ(post_json(base + "frangi", {{"sigmas", Json::array()}})->status, 422);
    EXPECT_EQ(post_json(base + "frangi", {{"beta", -1}})->status, 422);
    EXPECT_EQ(post_json(base + "frangi", {{"sigmas", {60}}})->status, 422);
    EXPECT_EQ(post_json(base + "frangi", {{"beta", "wide"}})->status, 422);
    EXPECT_EQ(client_->Post(base + "frangi", "{not json", "application/json")->status, 422);
    EXPECT_EQ(post_json(base + "connectivity", {{"variant", "zigzag"}})->status, 422);
    EXPECT_EQ(post_json(base + "connectivity", {{"growth", {{"tolerance", -0.5}}}})->status, 422);
    EXPECT_EQ(post_json("/datasets", {{"projects", {id}}, {"features", {{"window", 4}}}})->status, 422);
    EXPECT_EQ(post_json("/datasets", {{"projects", Json::array()}})->status, 422);
    EXPECT_EQ(post_json("/datasets", Json::object())->status, 422);
    EXPECT_EQ(post_json("/datasets", {{"projects", {id}}, {"sampling", {{"kind", "balanced"}, {"n", 10}}}})->status,
              422);  // empty manual layer has no vessel pixels
    EXPECT_EQ(get_json("/projects/" + id).at("layers").size(), 1u);
}

TEST_F(ServiceTest, HeldLockYields409) {
    const std::string id = create_project(phantom_.image);
    {
        auto lock = service_->storage().try_lock_project(id);
        ASSERT_TRUE(lock.owns_lock());
        EXPECT_EQ(put_mask(id, 0, phantom_.truth)->status, 409);
        EXPECT_EQ(post_json("/projects/" + id + "/filters/frangi", Json::object())->status, 409);
        EXPECT_EQ(client_->Delete("/projects/" + id)->status, 409);
        EXPECT_EQ(get_json("/projects/" + id).at("layers").size(), 1u);
    }
    EXPECT_EQ(put_mask(id, 0, phantom_.truth)->status, 200);
}

TEST_F(ServiceTest, ConcurrentConflictingPutsOneWins) {
    const std::string id = create_project(phantom_.image);
    BinaryMask a(96, 96), b(96, 96);
    a.set(10, 10);
    b.set(20, 20);
    for (int round = 0; round < 10; ++round) {
        const std::string etag = get_json("/projects/" + id).at("etag");
        int status[2] = {0, 0};
        std::atomic<bool> go{false};
        auto put = [&](int slot, const BinaryMask& m) {
            httplib::Client c("127.0.0.1", port_);
            while (!go.load()) std::this_thread::yield();
            httplib::Headers headers{{"If-Match", "\"" + etag + "\""}};
            const auto res = c.Put("/projects/" + id + "/layers/0", headers, png_of(m), "image/png");
            status[slot] = res ? res->status : -1;
        };
        std::thread t1(put, 0, round % 2 ? a : b);
        std::thread t2(put, 1, round % 2 ? b : a);
        go = true;
        t1.join();
        t2.join();
        EXPECT_EQ(std::min(status[0], status[1]), 200) << "round " << round;
        EXPECT_EQ(std::max(status[0], status[1]), 409) << "round " << round;
        const BinaryMask stored = service_->storage().load_project(id).layers[0].mask;
        EXPECT_TRUE(stored == a || stored == b);
    }
    EXPECT_EQ(put_mask(id, 0, a, "\"0000000000000000\"")->status, 409);
    EXPECT_EQ(put_mask(id, 0, a, "*")->status, 200);
}

TEST_F(ServiceTest, FiltersAppendLayersWithProvenance) {
    const std::string id = create_project(phantom_.image);
    auto res = post_json("/projects/" + id + "/filters/frangi", {{"sigmas", {1, 2}}, {"threshold", 0.1}});
    ASSERT_EQ(res->status, 201) << res->body;
    EXPECT_EQ(Json::parse(res->body).at("layer"), 1);
    FrangiParams fp;
    fp.sigmas = {1, 2};
    fp.threshold = 0.1;

    res = post_json("/projects/" + id + "/filters/connectivity?name=grown", {{"variant", "radial"}});
    ASSERT_EQ(res->status, 201) << res->body;
    ConnectivityParams cp;
    cp.variant = GrowthVariant::Radial;

    const Project p = service_->storage().load_project(id);
    ASSERT_EQ(p.layers.size(), 3u);
    EXPECT_EQ(p.layers[1].provenance, Provenance(FrangiProvenance{fp}));
    EXPECT_EQ(p.layers[1].mask, frangi_segment(phantom_.image, fp));
    EXPECT_EQ(p.layers[2].provenance, Provenance(ConnectivityProvenance{cp}));
    EXPECT_EQ(p.layers[2].mask, connectivity_filter(phantom_.image, cp));
    EXPECT_EQ(p.layers[2].name, "grown");
    EXPECT_EQ(p.active_layer, 2u);
}

TEST_F(ServiceTest, FullRetrainingLoop) {
    const std::string id = create_project(phantom_.image);
    const Json conn_params{{"growth", {{"tolerance", 0.12}}}};
    auto res = post_json("/projects/" + id + "/filters/connectivity", conn_params);
    ASSERT_EQ(res->status, 201) << res->body;
    const int conn_layer = Json::parse(res->body).at("layer");

    // The annotator corrects the filter output on the manual layer.
    ASSERT_EQ(put_mask(id, 0, phantom_.truth)->status, 200);

    res = post_json("/datasets", {{"projects", {id}},
                                  {"layer", "manual"},
                                  {"features", {{"scales", {1, 2}}}},
                                  {"sampling", {{"kind", "balanced"}, {"n", 150}, {"seed", 4}}}});
    ASSERT_EQ(res->status, 201) << res->body;
    const Json ds = Json::parse(res->body);
    EXPECT_EQ(ds.at("vessel"), 150);
    EXPECT_EQ(ds.at("background"), 150);
    const std::string dataset_id = ds.at("id");
    const auto arff = client_->Get("/datasets/" + dataset_id + "/arff");
    ASSERT_EQ(arff->status, 200);
    EXPECT_EQ(from_arff(arff->body).samples.size(), 300u);

    res = post_json("/models", {{"dataset", dataset_id}, {"kind", {{"type", "tree"}, {"max_depth", 6}}}});
    ASSERT_EQ(res->status, 202) << res->body;
    const std::string model_id = Json::parse(res->body).at("model");
    const Json train_job = wait_job(Json::parse(res->body).at("job"));
    ASSERT_EQ(train_job.at("status"), "done") << train_job.dump();
    EXPECT_EQ(train_job.at("result").at("model"), model_id);
    const TrainedModel model = model_from_json(client_->Get("/models/" + model_id)->body);
    EXPECT_EQ(model.kind, ModelKind::tree(6));

    res = post_json("/models/" + model_id + "/predict", {{"project", id}});
    ASSERT_EQ(res->status, 202) << res->body;
    const Json predict_job = wait_job(Json::parse(res->body).at("job"));
    ASSERT_EQ(predict_job.at("status"), "done") << predict_job.dump();

    const Json summary = get_json("/projects/" + id);
    const Json& layers = summary.at("layers");
    ASSERT_EQ(layers.size(), 3u);
    EXPECT_EQ(layers[0].at("provenance").at("type"), "manual");
    EXPECT_EQ(layers[conn_layer].at("provenance").at("type"), "connectivity");
    EXPECT_EQ(layers[conn_layer].at("provenance").at("params"),
              Json(json_to<ConnectivityParams>(conn_params)));
    EXPECT_EQ(layers[2].at("provenance").at("type"), "model");
    EXPECT_EQ(layers[2].at("provenance").at("model_id"), model_id);
    EXPECT_EQ(predict_job.at("result").at("layer"), 2);

    const Project p = service_->storage().load_project(id);
    EXPECT_EQ(p.layers[2].mask, predict_mask(model, phantom_.image).mask);
}

TEST_F(ServiceTest, FailedTrainingJobReportsError) {
    const std::string id = create_project(phantom_.image);
    auto res = post_json("/datasets", {{"projects", {id}}, {"sampling", {{"kind", "random"}, {"n", 50}, {"seed", 1}}}});
    ASSERT_EQ(res->status, 201) << res->body;
    res = post_json("/models", {{"dataset", Json::parse(res->body).at("id")}, {"kind", "nb"}});
    ASSERT_EQ(res->status, 202);
    const std::string model_id = Json::parse(res->body).at("model");
    const Json job = wait_job(Json::parse(res->body).at("job"));
    EXPECT_EQ(job.at("status"), "failed");
    EXPECT_NE(job.at("error").get<std::string>().find("SingleClassDataset"), std::string::npos);
    const auto model = client_->Get("/models/" + model_id);
    EXPECT_EQ(model->status, 500);
    EXPECT_NE(model->body.find("SingleClassDataset"), std::string::npos);
    EXPECT_EQ(post_json("/models", {{"dataset", "x"}, {"kind", {{"type", "knn"}, {"k", 4}}}})->status, 404);
}

TEST_F(ServiceTest, DeleteRemovesResources) {
    const std::string id = create_project(phantom_.image);
    ASSERT_EQ(put_mask(id, 0, phantom_.truth)->status, 200);
    auto res = post_json("/datasets", {{"projects", {id}}, {"sampling", {{"kind", "balanced"}, {"n", 20}}}});
    const std::string dataset_id = Json::parse(res->body).at("id");
    res = post_json("/models", {{"dataset", dataset_id}});
    const std::string model_id = Json::parse(res->body).at("model");
    const std::string job_id = Json::parse(res->body).at("job");
    wait_job(job_id);

    EXPECT_EQ(client_->Delete("/models/" + model_id)->status, 204);
    EXPECT_EQ(client_->Get("/models/" + model_id)->status, 404);
    EXPECT_EQ(client_->Delete("/datasets/" + dataset_id)->status, 204);
    EXPECT_EQ(client_->Get("/datasets/" + dataset_id + "/arff")->status, 404);
    EXPECT_EQ(client_->Delete("/projects/" + id)->status, 204);
    EXPECT_EQ(client_->Get("/projects/" + id)->status, 404);
    EXPECT_EQ(client_->Delete("/jobs/" + job_id)->status, 204);
    EXPECT_EQ(client_->Get("/jobs/" + job_id)->status, 404);
}

TEST_F(ServiceTest, ServesStaticAssets) {
    const auto res = client_->Get("/index.html");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->body, "<html>vesselseg</html>");
    EXPECT_EQ(get_json("/health").at("status"), "ok");
}

TEST_F(ServiceTest, CliAndServiceOutputsAreByteIdentical) {
    ScopedEnv epoch("SOURCE_DATE_EPOCH", "1700000000");
    const fs::path work = dir_.path() / "cli";
    fs::create_directories(work);
    save_image(phantom_.image, work / "img.png");

    // masks
    const std::string id = create_project(phantom_.image);
    const Json params{{"frangi", {{"sigmas", {1, 2, 3}}}},
                      {"seed_threshold", 0.45},
                      {"variant", "radial"},
                      {"growth", {{"tolerance", 0.09}, {"radius", 2}}},
                      {"cleanup", {{"order", "opening"}, {"element", {{"shape", "square"}, {"radius", 1}}}}}};
    auto res = post_json("/projects/" + id + "/filters/connectivity", params);
    ASSERT_EQ(res->status, 201) << res->body;
    const auto served = client_->Get("/projects/" + id + "/layers/" + Json::parse(res->body).at("layer").dump());
    auto r = cli({"segment", "connectivity", "--in", work / "img.png", "--out", work / "conn.png", "--sigmas", "1,2,3",
                  "--seed-threshold", "0.45", "--variant", "radial", "--tolerance", "0.09", "--radius", "2",
                  "--cleanup", "opening", "--element", "square", "--element-radius", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(served->body, text_of(work / "conn.png"));

    res = post_json("/projects/" + id + "/filters/frangi", {{"threshold", 0.08}});
    const auto served_frangi = client_->Get("/projects/" + id + "/layers/" + Json::parse(res->body).at("layer").dump());
    ASSERT_EQ(cli({"segment", "frangi", "--in", work / "img.png", "--out", work / "frangi.png", "--threshold", "0.08"}).code,
              0);
    EXPECT_EQ(served_frangi->body, text_of(work / "frangi.png"));

    // datasets
    ASSERT_EQ(put_mask(id, 0, phantom_.truth)->status, 200);
    const auto archive = client_->Get("/projects/" + id + "/archive");
    write_file(work / "p.vsproj", bytes_of(archive->body));
    res = post_json("/datasets", {{"projects", {id}},
                                  {"layer", "manual"},
                                  {"features", {{"scales", {1, 2}}, {"include_coordinates", true}}},
                                  {"sampling", {{"kind", "balanced"}, {"n", 80}, {"seed", 9}}}});
    ASSERT_EQ(res->status, 201) << res->body;
    const std::string dataset_id = Json::parse(res->body).at("id");
    const auto served_arff = client_->Get("/datasets/" + dataset_id + "/arff");
    r = cli({"dataset", "build", "--project", work / "p.vsproj", "--layer", "manual", "--scales", "1,2", "--coords",
             "--sampling", "balanced", "--n", "80", "--seed", "9", "--out", work / "ds.arff"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(served_arff->body, text_of(work / "ds.arff"));

    // models
    for (const std::string kind : {"nb", "knn", "tree"}) {
        res = post_json("/models", {{"dataset", dataset_id}, {"kind", kind}});
        ASSERT_EQ(res->status, 202);
        const std::string model_id = Json::parse(res->body).at("model");
        ASSERT_EQ(wait_job(Json::parse(res->body).at("job")).at("status"), "done");
        const auto served_model = client_->Get("/models/" + model_id);
        r = cli({"train", "--dataset", work / "ds.arff", "--model", kind, "--out", work / ("m_" + kind + ".json")});
        ASSERT_EQ(r.code, 0) << r.err;
        EXPECT_EQ(served_model->body, text_of(work / ("m_" + kind + ".json"))) << kind;
    }
}

}  // namespace
}  // namespace vesselseg
