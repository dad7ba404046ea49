#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "vesselseg/classify.hpp"
#include "vesselseg/connectivity.hpp"
#include "vesselseg/dataset.hpp"
#include "vesselseg/features.hpp"
#include "vesselseg/project.hpp"
#include "vesselseg/vesselness.hpp"

namespace vesselseg {

struct AppConfig {
    std::filesystem::path storage_root = "vesselseg-data";
    std::string listen_address = "127.0.0.1:8080";
    std::optional<std::filesystem::path> static_root;
    std::size_t workers = 0;  // 0 = hardware concurrency

    FrangiParams frangi;
    ConnectivityParams connectivity;
    FeatureConfig features;

    /// Keys: storage_root, listen_address, static_root, workers, frangi,
    /// connectivity, features. Missing keys keep their defaults.
    static AppConfig from_json(const nlohmann::json& j);
    static AppConfig load(const std::filesystem::path& path);

    /// VESSELSEG_STORAGE and VESSELSEG_LISTEN override the file values.
    void apply_environment();

    std::size_t worker_count() const noexcept;
    std::pair<std::string, int> host_port() const;

    /// Creates storage_root and its subdirectories; throws IoError when it
    /// is not writable.
    void prepare_storage() const;
};

/// Directory-backed store: projects/<id>.vsproj, models/<id>.json,
/// datasets/<id>.arff. Writes go through a temporary file and a rename so
/// readers never see partial files.
class Storage {
public:
    explicit Storage(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }

    /// Ids are [A-Za-z0-9_-]+; anything else is reported as NotFound.
    static bool valid_id(std::string_view id) noexcept;

    /// Non-blocking exclusive write lock for one project.
    std::unique_lock<std::mutex> try_lock_project(const std::string& id);
    std::unique_lock<std::mutex> lock_project(const std::string& id);

    bool has_project(const std::string& id) const;
    Project load_project(const std::string& id) const;
    std::vector<std::uint8_t> project_bytes(const std::string& id) const;
    /// Caller must hold the project's lock.
    void store_project(const Project& p);
    void remove_project(const std::string& id);
    std::vector<std::string> project_ids() const;

    bool has_model(const std::string& id) const;
    std::string model_text(const std::string& id) const;
    TrainedModel load_model(const std::string& id) const;
    void store_model(const std::string& id, const TrainedModel& m);
    void remove_model(const std::string& id);

    bool has_dataset(const std::string& id) const;
    std::string dataset_text(const std::string& id) const;
    Dataset load_dataset(const std::string& id) const;
    void store_dataset(const std::string& id, const Dataset& ds);
    void remove_dataset(const std::string& id);

    std::filesystem::path project_path(const std::string& id) const;
    std::filesystem::path model_path(const std::string& id) const;
    std::filesystem::path dataset_path(const std::string& id) const;

private:
    std::shared_ptr<std::mutex> project_mutex(const std::string& id);

    std::filesystem::path root_;
    std::mutex locks_mutex_;
    std::map<std::string, std::shared_ptr<std::mutex>> project_locks_;
};

/// Content tag of stored bytes (FNV-1a 64, hex).
std::string content_tag(std::span<const std::uint8_t> bytes);

enum class JobStatus { Queued, Running, Done, Failed };
std::string_view to_string(JobStatus s) noexcept;

struct JobRecord {
    std::string id;
    std::string kind;  // "train", "predict"
    JobStatus status = JobStatus::Queued;
    nlohmann::json parameters;
    nlohmann::json result;
    std::string error;

    bool terminal() const noexcept { return status == JobStatus::Done || status == JobStatus::Failed; }
};

void to_json(nlohmann::json& j, const JobRecord& r);

/// Bounded worker pool with a record per submitted job. Terminal records
/// never change again.
class JobQueue {
public:
    using Task = std::function<nlohmann::json()>;

    explicit JobQueue(std::size_t workers);
    ~JobQueue();
    JobQueue(const JobQueue&) = delete;
    JobQueue& operator=(const JobQueue&) = delete;

    std::string submit(std::string kind, nlohmann::json parameters, Task task);
    std::optional<JobRecord> get(const std::string& id) const;
    /// Blocks until the job is terminal. Returns nullopt for unknown ids.
    std::optional<JobRecord> wait(const std::string& id) const;
    bool remove(const std::string& id);

private:
    void worker_loop();
    void finish(const std::string& id, JobStatus status, nlohmann::json result, std::string error);

    mutable std::mutex mutex_;
    mutable std::condition_variable changed_;
    std::condition_variable work_ready_;
    std::deque<std::pair<std::string, Task>> pending_;
    std::map<std::string, JobRecord> records_;
    bool stopping_ = false;
    std::vector<std::thread> threads_;
};

/// HTTP status for a library error code.
int http_status(ErrorCode code) noexcept;

class Service {
public:
    explicit Service(AppConfig cfg);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds the listen address; port 0 picks a free port. Returns the port.
    int bind();
    /// Serves until stop(). Requires bind().
    void run();
    /// bind() + run() on a background thread.
    int start();
    void stop();

    const AppConfig& config() const noexcept;
    Storage& storage() noexcept;
    JobQueue& jobs() noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Entry point of the command-line tool. 0 success, 1 domain error, 2 usage error.
int run_cli(int argc, char** argv);
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace vesselseg
