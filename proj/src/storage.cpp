#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "vesselseg/dataset_io.hpp"
#include "vesselseg/image_io.hpp"
#include "vesselseg/json_io.hpp"
#include "vesselseg/service.hpp"

namespace vesselseg {

namespace fs = std::filesystem;

namespace {

template <typename T>
void read_params(const Json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        from_json(j.at(key), out);
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string(key) + ": " + e.what());
    }
    out.validate();
}

void write_atomically(const fs::path& path, std::span<const std::uint8_t> bytes) {
    static std::atomic<unsigned> counter{0};
    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(counter.fetch_add(1));
    write_file(tmp, bytes);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(ErrorCode::IoError, "cannot replace " + path.string());
    }
}

std::span<const std::uint8_t> as_bytes(const std::string& s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::string read_text(const fs::path& path) {
    const auto bytes = read_file(path);
    return {bytes.begin(), bytes.end()};
}

void remove_file(const fs::path& path, const std::string& what) {
    std::error_code ec;
    if (!fs::remove(path, ec)) throw Error(ErrorCode::NotFound, what + " not found");
}

}  // namespace

AppConfig AppConfig::from_json(const Json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
    AppConfig cfg;
    try {
        if (j.contains("storage_root")) cfg.storage_root = j.at("storage_root").get<std::string>();
        if (j.contains("listen_address")) cfg.listen_address = j.at("listen_address").get<std::string>();
        if (j.contains("static_root") && !j.at("static_root").is_null()) {
            cfg.static_root = fs::path(j.at("static_root").get<std::string>());
        }
        if (j.contains("workers")) cfg.workers = j.at("workers").get<std::size_t>();
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, e.what());
    }
    read_params(j, "frangi", cfg.frangi);
    read_params(j, "connectivity", cfg.connectivity);
    read_params(j, "features", cfg.features);
    cfg.host_port();
    return cfg;
}

AppConfig AppConfig::load(const fs::path& path) {
    if (!fs::exists(path)) throw Error(ErrorCode::NotFound, "config file not found: " + path.string());
    return from_json(parse_json(read_text(path)));
}

void AppConfig::apply_environment() {
    if (const char* s = std::getenv("VESSELSEG_STORAGE"); s && *s) storage_root = s;
    if (const char* s = std::getenv("VESSELSEG_LISTEN"); s && *s) listen_address = s;
}

std::size_t AppConfig::worker_count() const noexcept {
    if (workers > 0) return workers;
    return std::max(1u, std::thread::hardware_concurrency());
}

std::pair<std::string, int> AppConfig::host_port() const {
    const auto colon = listen_address.rfind(':');
    if (colon == std::string::npos || colon == 0) {
        throw Error(ErrorCode::InvalidArgument, "listen address must be host:port, got '" + listen_address + "'");
    }
    const std::string host = listen_address.substr(0, colon);
    const std::string port_text = listen_address.substr(colon + 1);
    int port = -1;
    const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port < 0 || port > 65535) {
        throw Error(ErrorCode::InvalidArgument, "bad port in listen address '" + listen_address + "'");
    }
    return {host, port};
}

void AppConfig::prepare_storage() const {
    std::error_code ec;
    for (const char* sub : {"projects", "models", "datasets"}) {
        fs::create_directories(storage_root / sub, ec);
        if (ec) throw Error(ErrorCode::IoError, "cannot create " + (storage_root / sub).string());
    }
    const fs::path probe = storage_root / ".write-probe";
    {
        std::ofstream out(probe);
        if (!out || !(out << "ok")) throw Error(ErrorCode::IoError, storage_root.string() + " is not writable");
    }
    fs::remove(probe, ec);
}

Storage::Storage(fs::path root) : root_(std::move(root)) {}

bool Storage::valid_id(std::string_view id) noexcept {
    if (id.empty() || id.size() > 128) return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
    });
}

fs::path Storage::project_path(const std::string& id) const { return root_ / "projects" / (id + ".vsproj"); }
fs::path Storage::model_path(const std::string& id) const { return root_ / "models" / (id + ".json"); }
fs::path Storage::dataset_path(const std::string& id) const { return root_ / "datasets" / (id + ".arff"); }

std::shared_ptr<std::mutex> Storage::project_mutex(const std::string& id) {
    std::lock_guard guard(locks_mutex_);
    auto& slot = project_locks_[id];
    if (!slot) slot = std::make_shared<std::mutex>();
    return slot;
}

std::unique_lock<std::mutex> Storage::try_lock_project(const std::string& id) {
    // Mutexes are never erased, so the reference outlives the lock.
    return std::unique_lock<std::mutex>(*project_mutex(id), std::try_to_lock);
}

std::unique_lock<std::mutex> Storage::lock_project(const std::string& id) {
    return std::unique_lock<std::mutex>(*project_mutex(id));
}

bool Storage::has_project(const std::string& id) const { return valid_id(id) && fs::exists(project_path(id)); }

std::vector<std::uint8_t> Storage::project_bytes(const std::string& id) const {
    if (!has_project(id)) throw Error(ErrorCode::NotFound, "project " + id + " not found");
    return read_file(project_path(id));
}

Project Storage::load_project(const std::string& id) const { return project_from_archive(project_bytes(id)); }

void Storage::store_project(const Project& p) {
    if (!valid_id(p.id)) throw Error(ErrorCode::InvalidArgument, "bad project id");
    write_atomically(project_path(p.id), project_to_archive(p));
}

void Storage::remove_project(const std::string& id) {
    if (!valid_id(id)) throw Error(ErrorCode::NotFound, "project " + id + " not found");
    remove_file(project_path(id), "project " + id);
}

std::vector<std::string> Storage::project_ids() const {
    std::vector<std::string> ids;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(root_ / "projects", ec)) {
        if (entry.path().extension() == ".vsproj") ids.push_back(entry.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

bool Storage::has_model(const std::string& id) const { return valid_id(id) && fs::exists(model_path(id)); }

std::string Storage::model_text(const std::string& id) const {
    if (!has_model(id)) throw Error(ErrorCode::NotFound, "model " + id + " not found");
    return read_text(model_path(id));
}

TrainedModel Storage::load_model(const std::string& id) const { return model_from_json(model_text(id)); }

void Storage::store_model(const std::string& id, const TrainedModel& m) {
    if (!valid_id(id)) throw Error(ErrorCode::InvalidArgument, "bad model id");
    write_atomically(model_path(id), as_bytes(model_to_json(m)));
}

void Storage::remove_model(const std::string& id) {
    if (!valid_id(id)) throw Error(ErrorCode::NotFound, "model " + id + " not found");
    remove_file(model_path(id), "model " + id);
}

bool Storage::has_dataset(const std::string& id) const { return valid_id(id) && fs::exists(dataset_path(id)); }

std::string Storage::dataset_text(const std::string& id) const {
    if (!has_dataset(id)) throw Error(ErrorCode::NotFound, "dataset " + id + " not found");
    return read_text(dataset_path(id));
}

Dataset Storage::load_dataset(const std::string& id) const { return from_arff(dataset_text(id)); }

void Storage::store_dataset(const std::string& id, const Dataset& ds) {
    if (!valid_id(id)) throw Error(ErrorCode::InvalidArgument, "bad dataset id");
    write_atomically(dataset_path(id), as_bytes(to_arff(ds)));
}

void Storage::remove_dataset(const std::string& id) {
    if (!valid_id(id)) throw Error(ErrorCode::NotFound, "dataset " + id + " not found");
    remove_file(dataset_path(id), "dataset " + id);
}

std::string content_tag(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
    return out;
}

std::string_view to_string(JobStatus s) noexcept {
    switch (s) {
        case JobStatus::Queued: return "queued";
        case JobStatus::Running: return "running";
        case JobStatus::Done: return "done";
        case JobStatus::Failed: return "failed";
    }
    return "unknown";
}

void to_json(Json& j, const JobRecord& r) {
    j = Json{{"id", r.id},
             {"kind", r.kind},
             {"status", to_string(r.status)},
             {"parameters", r.parameters},
             {"result", r.result},
             {"error", r.error.empty() ? Json(nullptr) : Json(r.error)}};
}

JobQueue::JobQueue(std::size_t workers) {
    if (workers == 0) workers = 1;
    threads_.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i) threads_.emplace_back([this] { worker_loop(); });
}

JobQueue::~JobQueue() {
    {
        std::lock_guard guard(mutex_);
        stopping_ = true;
    }
    work_ready_.notify_all();
    for (auto& t : threads_) t.join();
}

std::string JobQueue::submit(std::string kind, Json parameters, Task task) {
    const std::string id = generate_id();
    {
        std::lock_guard guard(mutex_);
        JobRecord rec;
        rec.id = id;
        rec.kind = std::move(kind);
        rec.parameters = std::move(parameters);
        records_.emplace(id, std::move(rec));
        pending_.emplace_back(id, std::move(task));
    }
    work_ready_.notify_one();
    return id;
}

std::optional<JobRecord> JobQueue::get(const std::string& id) const {
    std::lock_guard guard(mutex_);
    const auto it = records_.find(id);
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

std::optional<JobRecord> JobQueue::wait(const std::string& id) const {
    std::unique_lock lock(mutex_);
    for (;;) {
        const auto it = records_.find(id);
        if (it == records_.end()) return std::nullopt;
        if (it->second.terminal()) return it->second;
        changed_.wait(lock);
    }
}

bool JobQueue::remove(const std::string& id) {
    std::lock_guard guard(mutex_);
    const auto it = records_.find(id);
    if (it == records_.end() || !it->second.terminal()) return false;
    records_.erase(it);
    return true;
}

void JobQueue::finish(const std::string& id, JobStatus status, Json result, std::string error) {
    {
        std::lock_guard guard(mutex_);
        auto& rec = records_.at(id);
        if (rec.terminal()) return;
        rec.status = status;
        rec.result = std::move(result);
        rec.error = std::move(error);
    }
    changed_.notify_all();
}

void JobQueue::worker_loop() {
    for (;;) {
        std::pair<std::string, Task> job;
        {
            std::unique_lock lock(mutex_);
            work_ready_.wait(lock, [this] { return stopping_ || !pending_.empty(); });
            if (pending_.empty()) return;
            job = std::move(pending_.front());
            pending_.pop_front();
            records_.at(job.first).status = JobStatus::Running;
        }
        changed_.notify_all();
        try {
            finish(job.first, JobStatus::Done, job.second(), {});
        } catch (const std::exception& e) {
            finish(job.first, JobStatus::Failed, nullptr, e.what());
        }
    }
}

int http_status(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::NotFound: return 404;
        case ErrorCode::LayerLocked: return 409;
        case ErrorCode::IoError:
        case ErrorCode::CorruptProject:
        case ErrorCode::CorruptModel:
        case ErrorCode::VersionMismatch: return 500;
        default: return 422;
    }
}

}  // namespace vesselseg
