#include <httplib.h>

#include <charconv>

#include "vesselseg/dataset_io.hpp"
#include "vesselseg/image_io.hpp"
#include "vesselseg/json_io.hpp"
#include "vesselseg/service.hpp"

namespace vesselseg {

namespace {

using httplib::Request;
using httplib::Response;

void send_json(Response& res, int status, const Json& j) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
}

void send_error(Response& res, int status, std::string_view code, const std::string& message) {
    send_json(res, status, Json{{"error", code}, {"message", message}});
}

void send_bytes(Response& res, const std::vector<std::uint8_t>& bytes, const char* type) {
    res.status = 200;
    res.set_content(std::string(bytes.begin(), bytes.end()), type);
}

struct Conflict : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const Request& req, Response& res) {
        try {
            fn(req, res);
        } catch (const Conflict& e) {
            send_error(res, 409, "Conflict", e.what());
        } catch (const Error& e) {
            send_error(res, http_status(e.code()), to_string(e.code()), e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "InternalError", e.what());
        }
    };
}

const std::string& param(const Request& req, const char* key) { return req.path_params.at(key); }

std::size_t layer_index(const Request& req, const Project& p) {
    const std::string& text = param(req, "n");
    std::size_t n = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
    if (ec != std::errc{} || ptr != text.data() + text.size() || n >= p.layers.size()) {
        throw Error(ErrorCode::NotFound, "layer " + text + " not found");
    }
    return n;
}

Json body_json(const Request& req) {
    if (req.body.empty()) return Json::object();
    Json j = parse_json(req.body);
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object");
    return j;
}

/// `defaults` overridden by the keys present in `j`, then validated.
template <typename T>
T merged(T defaults, const Json& j) {
    try {
        from_json(j, defaults);
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, e.what());
    }
    if constexpr (requires { defaults.validate(); }) defaults.validate();
    return defaults;
}

template <typename T>
T field(const Json& j, const char* key) {
    if (!j.contains(key)) throw Error(ErrorCode::InvalidArgument, std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string(key) + ": " + e.what());
    }
}

std::span<const std::uint8_t> bytes_of(const std::string& s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

Json project_summary(const Project& p, const std::string& etag) {
    Json layers = Json::array();
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        const MaskLayer& l = p.layers[i];
        layers.push_back({{"index", i},
                          {"name", l.name},
                          {"visible", l.visible},
                          {"opacity", l.opacity},
                          {"locked", l.locked},
                          {"vessel_pixels", l.mask.count()},
                          {"provenance", provenance_json(l.provenance)}});
    }
    return Json{{"id", p.id},         {"name", p.name},
                {"width", p.width()}, {"height", p.height()},
                {"created", p.created}, {"modified", p.modified},
                {"active_layer", p.active_layer}, {"etag", etag},
                {"layers", std::move(layers)}};
}

Json dataset_summary(const std::string& id, const Dataset& ds) {
    return Json{{"id", id},
                {"samples", ds.samples.size()},
                {"background", ds.count(Label::Background)},
                {"vessel", ds.count(Label::Vessel)},
                {"features", ds.config.feature_names()}};
}

}  // namespace

struct Service::Impl {
    explicit Impl(AppConfig c)
        : cfg((c.prepare_storage(), std::move(c))), storage(cfg.storage_root), jobs(cfg.worker_count()) {}

    AppConfig cfg;
    Storage storage;
    JobQueue jobs;
    httplib::Server server;
    std::thread thread;
    int port = -1;

    std::mutex model_jobs_mutex;
    std::map<std::string, std::string> model_jobs;  // model id -> training job id

    std::unique_lock<std::mutex> claim(const std::string& id) {
        if (!storage.has_project(id)) throw Error(ErrorCode::NotFound, "project " + id + " not found");
        auto lock = storage.try_lock_project(id);
        if (!lock.owns_lock()) throw Conflict("project " + id + " is being modified by another request");
        return lock;
    }

    void routes();
    void add_filter(const Request& req, Response& res, bool connectivity);
};

void Service::Impl::add_filter(const Request& req, Response& res, bool connectivity) {
    const std::string& id = param(req, "id");
    const Json body = body_json(req);
    Provenance prov;
    if (connectivity) {
        prov = ConnectivityProvenance{merged(cfg.connectivity, body)};
    } else {
        prov = FrangiProvenance{merged(cfg.frangi, body)};
    }
    const auto lock = claim(id);
    Project p = storage.load_project(id);
    const BinaryMask mask = connectivity ? connectivity_filter(p.base_image, std::get<ConnectivityProvenance>(prov).params)
                                         : frangi_segment(p.base_image, std::get<FrangiProvenance>(prov).params);
    add_filter_layer(p, mask, prov, req.has_param("name") ? req.get_param_value("name") : "");
    storage.store_project(p);
    const std::size_t index = p.layers.size() - 1;
    send_json(res, 201,
              Json{{"layer", index},
                   {"name", p.layers[index].name},
                   {"vessel_pixels", mask.count()},
                   {"provenance", provenance_json(prov)}});
}

void Service::Impl::routes() {
    server.Get("/health", guarded([](const Request&, Response& res) { send_json(res, 200, {{"status", "ok"}}); }));

    server.Get("/projects", guarded([this](const Request&, Response& res) {
                   send_json(res, 200, Json{{"projects", storage.project_ids()}});
               }));

    server.Post("/projects", guarded([this](const Request& req, Response& res) {
                    std::string image_bytes;
                    std::string name = req.has_param("name") ? req.get_param_value("name") : "";
                    if (req.is_multipart_form_data()) {
                        if (!req.has_file("image")) throw Error(ErrorCode::InvalidArgument, "missing 'image' part");
                        image_bytes = req.get_file_value("image").content;
                        if (req.has_file("name")) name = req.get_file_value("name").content;
                    } else {
                        image_bytes = req.body;
                    }
                    if (image_bytes.empty()) throw Error(ErrorCode::InvalidArgument, "empty image");
                    const RasterImage img = decode_image(bytes_of(image_bytes));
                    const Project p = create_project(img, name.empty() ? "untitled" : name);
                    {
                        const auto lock = storage.lock_project(p.id);
                        storage.store_project(p);
                    }
                    send_json(res, 201, Json{{"id", p.id}, {"width", p.width()}, {"height", p.height()}});
                }));

    server.Get("/projects/:id", guarded([this](const Request& req, Response& res) {
                   const auto bytes = storage.project_bytes(param(req, "id"));
                   const std::string tag = content_tag(bytes);
                   res.set_header("ETag", "\"" + tag + "\"");
                   send_json(res, 200, project_summary(project_from_archive(bytes), tag));
               }));

    server.Get("/projects/:id/archive", guarded([this](const Request& req, Response& res) {
                   send_bytes(res, storage.project_bytes(param(req, "id")), "application/zip");
               }));

    server.Delete("/projects/:id", guarded([this](const Request& req, Response& res) {
                      const std::string& id = param(req, "id");
                      const auto lock = claim(id);
                      storage.remove_project(id);
                      res.status = 204;
                  }));

    server.Get("/projects/:id/image", guarded([this](const Request& req, Response& res) {
                   send_bytes(res, encode_image(storage.load_project(param(req, "id")).base_image), "image/png");
               }));

    server.Get("/projects/:id/layers/:n", guarded([this](const Request& req, Response& res) {
                   const Project p = storage.load_project(param(req, "id"));
                   send_bytes(res, encode_image(p.layers[layer_index(req, p)].mask), "image/png");
               }));

    server.Put("/projects/:id/layers/:n", guarded([this](const Request& req, Response& res) {
                   const std::string& id = param(req, "id");
                   const auto lock = claim(id);
                   const auto bytes = storage.project_bytes(id);
                   if (req.has_header("If-Match")) {
                       std::string expected = req.get_header_value("If-Match");
                       if (expected.size() >= 2 && expected.front() == '"' && expected.back() == '"') {
                           expected = expected.substr(1, expected.size() - 2);
                       }
                       if (expected != "*" && expected != content_tag(bytes)) {
                           throw Conflict("project " + id + " changed since it was read");
                       }
                   }
                   Project p = project_from_archive(bytes);
                   const std::size_t n = layer_index(req, p);
                   const std::string& payload =
                       req.is_multipart_form_data() && req.has_file("mask") ? req.get_file_value("mask").content : req.body;
                   if (payload.empty()) throw Error(ErrorCode::InvalidArgument, "empty mask");
                   const BinaryMask mask = decode_mask(bytes_of(payload));
                   if (!mask.same_shape(p.layers[n].mask)) {
                       throw Error(ErrorCode::DimensionMismatch,
                                   "mask is " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                                       ", project is " + std::to_string(p.width()) + "x" + std::to_string(p.height()));
                   }
                   apply_edit(p, EditOp{n, ReplaceLayerOp{mask}});
                   storage.store_project(p);
                   const std::string tag = content_tag(storage.project_bytes(id));
                   res.set_header("ETag", "\"" + tag + "\"");
                   send_json(res, 200, Json{{"layer", n}, {"etag", tag}, {"provenance", provenance_json(p.layers[n].provenance)}});
               }));

    server.Post("/projects/:id/filters/frangi",
                guarded([this](const Request& req, Response& res) { add_filter(req, res, false); }));
    server.Post("/projects/:id/filters/connectivity",
                guarded([this](const Request& req, Response& res) { add_filter(req, res, true); }));

    server.Post("/datasets", guarded([this](const Request& req, Response& res) {
                    const Json body = body_json(req);
                    const auto ids = field<std::vector<std::string>>(body, "projects");
                    if (ids.empty()) throw Error(ErrorCode::InvalidArgument, "at least one project is required");
                    const LayerSelector selector =
                        LayerSelector::parse(body.contains("layer") ? field<std::string>(body, "layer") : "manual");
                    const FeatureConfig features = merged(cfg.features, body.value("features", Json::object()));
                    const Sampling sampling = merged(Sampling{}, body.value("sampling", Json::object()));

                    std::vector<LabeledImage> images;
                    for (const std::string& pid : ids) {
                        const Project p = storage.load_project(pid);
                        images.push_back({p.base_image, selector.select(p).mask, p.id});
                    }
                    const Dataset ds = build_dataset(images, features, sampling);
                    const std::string id = generate_id();
                    storage.store_dataset(id, ds);
                    send_json(res, 201, dataset_summary(id, ds));
                }));

    server.Get("/datasets/:id", guarded([this](const Request& req, Response& res) {
                   send_json(res, 200, dataset_summary(param(req, "id"), storage.load_dataset(param(req, "id"))));
               }));

    server.Get("/datasets/:id/arff", guarded([this](const Request& req, Response& res) {
                   res.set_content(storage.dataset_text(param(req, "id")), "text/plain; charset=utf-8");
               }));

    server.Delete("/datasets/:id", guarded([this](const Request& req, Response& res) {
                      storage.remove_dataset(param(req, "id"));
                      res.status = 204;
                  }));

    server.Post("/models", guarded([this](const Request& req, Response& res) {
                    const Json body = body_json(req);
                    const auto dataset_id = field<std::string>(body, "dataset");
                    if (!storage.has_dataset(dataset_id)) {
                        throw Error(ErrorCode::NotFound, "dataset " + dataset_id + " not found");
                    }
                    const ModelKind kind = body.contains("kind") ? json_to<ModelKind>(body.at("kind")) : ModelKind{};
                    const std::string model_id = generate_id();
                    const Json params{{"dataset", dataset_id}, {"kind", kind}, {"model", model_id}};
                    std::lock_guard guard(model_jobs_mutex);
                    const std::string job = jobs.submit("train", params, [this, dataset_id, kind, model_id] {
                        const TrainedModel m = train(storage.load_dataset(dataset_id), kind);
                        storage.store_model(model_id, m);
                        return Json{{"model", model_id}};
                    });
                    model_jobs[model_id] = job;
                    send_json(res, 202, Json{{"job", job}, {"model", model_id}});
                }));

    server.Get("/models/:id", guarded([this](const Request& req, Response& res) {
                   const std::string& id = param(req, "id");
                   if (storage.has_model(id)) {
                       res.set_content(storage.model_text(id), "application/json");
                       return;
                   }
                   std::optional<JobRecord> job;
                   {
                       std::lock_guard guard(model_jobs_mutex);
                       if (const auto it = model_jobs.find(id); it != model_jobs.end()) job = jobs.get(it->second);
                   }
                   if (!job) throw Error(ErrorCode::NotFound, "model " + id + " not found");
                   if (job->status == JobStatus::Failed) {
                       send_json(res, 500, Json{{"error", "JobFailed"}, {"message", job->error}, {"job", *job}});
                   } else if (job->status == JobStatus::Done) {
                       throw Error(ErrorCode::NotFound, "model " + id + " not found");
                   } else {
                       send_json(res, 202, *job);
                   }
               }));

    server.Delete("/models/:id", guarded([this](const Request& req, Response& res) {
                      storage.remove_model(param(req, "id"));
                      res.status = 204;
                  }));

    server.Post("/models/:id/predict", guarded([this](const Request& req, Response& res) {
                    const std::string model_id = param(req, "id");
                    if (!storage.has_model(model_id)) throw Error(ErrorCode::NotFound, "model " + model_id + " not found");
                    const Json body = body_json(req);
                    const auto project_id = field<std::string>(body, "project");
                    if (!storage.has_project(project_id)) {
                        throw Error(ErrorCode::NotFound, "project " + project_id + " not found");
                    }
                    const double threshold = body.contains("threshold") ? field<double>(body, "threshold")
                                                                        : kDefaultDecisionThreshold;
                    if (!(threshold >= 0.0 && threshold <= 1.0)) {
                        throw Error(ErrorCode::InvalidArgument, "threshold must be in [0, 1]");
                    }
                    const std::string name = body.contains("name") ? field<std::string>(body, "name") : "";
                    const Json params{{"model", model_id}, {"project", project_id}, {"threshold", threshold}};
                    const std::string job =
                        jobs.submit("predict", params, [this, model_id, project_id, threshold, name] {
                            const TrainedModel m = storage.load_model(model_id);
                            const BinaryMask mask = predict_mask(m, storage.load_project(project_id).base_image, threshold).mask;
                            const auto lock = storage.lock_project(project_id);
                            Project p = storage.load_project(project_id);
                            add_filter_layer(p, mask, ModelProvenance{model_id}, name);
                            storage.store_project(p);
                            return Json{{"project", project_id}, {"layer", p.layers.size() - 1}, {"model", model_id}};
                        });
                    send_json(res, 202, Json{{"job", job}});
                }));

    server.Get("/jobs/:id", guarded([this](const Request& req, Response& res) {
                   const auto job = jobs.get(param(req, "id"));
                   if (!job) throw Error(ErrorCode::NotFound, "job " + param(req, "id") + " not found");
                   send_json(res, 200, *job);
               }));

    server.Delete("/jobs/:id", guarded([this](const Request& req, Response& res) {
                      const std::string& id = param(req, "id");
                      const auto job = jobs.get(id);
                      if (!job) throw Error(ErrorCode::NotFound, "job " + id + " not found");
                      if (!jobs.remove(id)) throw Conflict("job " + id + " has not finished");
                      res.status = 204;
                  }));

    if (cfg.static_root && !server.set_mount_point("/", cfg.static_root->string())) {
        throw Error(ErrorCode::NotFound, "static asset directory not found: " + cfg.static_root->string());
    }
}

Service::Service(AppConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) { impl_->routes(); }

Service::~Service() { stop(); }

int Service::bind() {
    const auto [host, port] = impl_->cfg.host_port();
    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port(host);
        if (impl_->port < 0) throw Error(ErrorCode::IoError, "cannot bind " + host);
    } else {
        if (!impl_->server.bind_to_port(host, port)) throw Error(ErrorCode::IoError, "cannot bind " + impl_->cfg.listen_address);
        impl_->port = port;
    }
    return impl_->port;
}

void Service::run() {
    if (impl_->port < 0) throw Error(ErrorCode::InvalidArgument, "service is not bound");
    impl_->server.listen_after_bind();
}

int Service::start() {
    const int port = bind();
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port;
}

void Service::stop() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

const AppConfig& Service::config() const noexcept { return impl_->cfg; }
Storage& Service::storage() noexcept { return impl_->storage; }
JobQueue& Service::jobs() noexcept { return impl_->jobs; }

}  // namespace vesselseg
