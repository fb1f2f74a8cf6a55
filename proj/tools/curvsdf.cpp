// curvsdf: pipeline driver for depth rendering, fusion, tracking, sampling,
// training, mesh extraction and evaluation.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>
#include <json.hpp>

#include "curvsdf/depth_io.hpp"
#include "curvsdf/mesh_extract.hpp"
#include "curvsdf/metrics.hpp"
#include "curvsdf/pose_tracking.hpp"
#include "curvsdf/render.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace curvsdf;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json default_config() {
    return json{
        {"output_dir", "out"},
        {"preset", ""},
        {"dataset", {{"depth_dir", ""}, {"trajectory", ""}, {"intrinsics", ""}}},
        {"synthetic",
         {{"shape", "sphere"},
          {"center", {0.0, 0.0, 0.0}},
          {"radius", 0.5},
          {"major", 0.5},
          {"minor", 0.2},
          {"half_extent", {0.5, 0.5, 0.5}},
          {"frames", 8},
          {"camera_distance", 2.0},
          {"width", 128},
          {"height", 128},
          {"fx", 0.0},
          {"fy", 0.0},
          {"cx", -1.0},
          {"cy", -1.0},
          {"depth_scale", 5000.0}}},
        {"grid",
         {{"nx", 64},
          {"ny", 64},
          {"nz", 64},
          {"voxel_size", 0.025},
          {"truncation", 5},
          {"center", {0.0, 0.0, 0.0}},
          {"w_min", 0.5}}},
        {"sampler", {{"m", 512}, {"m_unobs", 512}, {"q_lo", 0.3}, {"q_hi", 0.7}, {"rank_percentile", false}, {"seed", 0}}},
        {"training",
         {{"layers", 8},
          {"width", 256},
          {"epochs", 2000},
          {"batch", 2048},
          {"lr", 1e-4},
          {"decay", 0.5},
          {"tau_n", 1.0},
          {"tau_w", 1.0},
          {"tau_e", 0.1},
          {"mode", "full"},
          {"sampling", "stratified"},
          {"seed", 0}}},
        {"extraction", {{"res", 128}, {"tau", 0.1}}},
        {"eval",
         {{"n", 100000}, {"seed", 0}, {"ground_truth", ""}, {"dataset", "synthetic"}, {"method", "curvsdf"}}},
        {"noise", {{"depth_sigma", 0.0}, {"pose_sigma_deg", 0.0}, {"pose_sigma_t", 0.0}, {"seed", 0}}},
        {"tracking", {{"max_iters", 20}, {"tol", 1e-6}}},
    };
}

void merge_checked(json& base, const json& over, const std::string& prefix) {
    if (!over.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
    for (auto it = over.begin(); it != over.end(); ++it) {
        std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!base.contains(it.key())) throw ConfigError("unknown config key '" + path + "'");
        json& slot = base[it.key()];
        if (slot.is_object()) {
            merge_checked(slot, it.value(), path);
        } else {
            if (slot.is_number() && !it.value().is_number())
                throw ConfigError("config key '" + path + "' must be a number");
            if (slot.is_string() && !it.value().is_string())
                throw ConfigError("config key '" + path + "' must be a string");
            if (slot.is_boolean() && !it.value().is_boolean())
                throw ConfigError("config key '" + path + "' must be a boolean");
            slot = it.value();
        }
    }
}

void apply_set(json& cfg, const std::string& kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    std::string key = kv.substr(0, eq);
    std::string raw = kv.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (...) {
        value = raw;  // unquoted strings
    }
    // build a nested object along the dotted path and merge it
    json patch = value;
    size_t pos = key.size();
    while (true) {
        size_t dot = key.rfind('.', pos - 1);
        std::string part = key.substr(dot == std::string::npos ? 0 : dot + 1, pos - (dot == std::string::npos ? 0 : dot + 1));
        patch = json{{part, patch}};
        if (dot == std::string::npos) break;
        pos = dot;
    }
    merge_checked(cfg, patch, "");
}

void apply_preset(json& cfg) {
    std::string preset = cfg["preset"];
    if (preset.empty()) return;
    if (preset == "sparse64") {
        cfg["grid"]["nx"] = cfg["grid"]["ny"] = cfg["grid"]["nz"] = 64;
        cfg["grid"]["voxel_size"] = 0.008;
    } else if (preset == "dense256") {
        cfg["grid"]["nx"] = cfg["grid"]["ny"] = cfg["grid"]["nz"] = 256;
        cfg["grid"]["voxel_size"] = 0.002;
    } else {
        throw ConfigError("unknown preset '" + preset + "' (expected sparse64 or dense256)");
    }
}

Vec3 vec3_of(const json& arr, const std::string& field) {
    if (!arr.is_array() || arr.size() != 3) throw ConfigError("config key '" + field + "' must be a 3-array");
    return Vec3(arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>());
}

void require_positive(double v, const std::string& field) {
    if (!(v > 0)) throw ConfigError("config key '" + field + "' must be positive");
}

void require_path(const std::string& p, const std::string& field) {
    if (p.empty()) throw ConfigError("config key '" + field + "' is required for this command");
    if (!fs::exists(p)) throw ConfigError("config key '" + field + "': path does not exist: " + p);
}

Intrinsics synthetic_intrinsics(const json& syn) {
    Intrinsics in;
    in.width = syn["width"].get<int>();
    in.height = syn["height"].get<int>();
    if (in.width < 2 || in.height < 2) throw ConfigError("config key 'synthetic.width/height' must be >= 2");
    in.fx = syn["fx"].get<double>();
    in.fy = syn["fy"].get<double>();
    if (in.fx <= 0) in.fx = in.width;
    if (in.fy <= 0) in.fy = in.fx;
    in.cx = syn["cx"].get<double>();
    in.cy = syn["cy"].get<double>();
    if (in.cx < 0) in.cx = 0.5 * (in.width - 1);
    if (in.cy < 0) in.cy = 0.5 * (in.height - 1);
    in.validate();
    return in;
}

std::unique_ptr<Shape> make_shape(const json& syn) {
    std::string kind = syn["shape"];
    Vec3 c = vec3_of(syn["center"], "synthetic.center");
    if (kind == "sphere") {
        require_positive(syn["radius"].get<double>(), "synthetic.radius");
        return std::make_unique<SphereShape>(c, syn["radius"].get<double>());
    }
    if (kind == "torus") {
        require_positive(syn["major"].get<double>(), "synthetic.major");
        require_positive(syn["minor"].get<double>(), "synthetic.minor");
        return std::make_unique<TorusShape>(c, syn["major"].get<double>(), syn["minor"].get<double>());
    }
    if (kind == "box") {
        Vec3 h = vec3_of(syn["half_extent"], "synthetic.half_extent");
        return std::make_unique<BoxShape>(c, h);
    }
    throw ConfigError("config key 'synthetic.shape': unknown shape '" + kind + "'");
}

UncertainMesh ground_truth_mesh(const json& cfg) {
    std::string gt = cfg["eval"]["ground_truth"];
    if (!gt.empty()) {
        require_path(gt, "eval.ground_truth");
        return load_mesh_ply(gt);
    }
    const json& syn = cfg["synthetic"];
    std::string kind = syn["shape"];
    Vec3 c = vec3_of(syn["center"], "synthetic.center");
    UncertainMesh mesh;
    auto add_tri_mesh = [&mesh](const TriMesh& tm) {
        mesh.vertices = tm.vertices;
        mesh.uncertainty.assign(tm.vertices.size(), 1.0);
        for (const auto& t : tm.triangles) mesh.triangles.emplace_back(t[0], t[1], t[2]);
    };
    if (kind == "sphere") {
        add_tri_mesh(TriMesh::uv_sphere(c, syn["radius"].get<double>(), 96, 192));
        return mesh;
    }
    if (kind == "torus") {
        double R = syn["major"].get<double>(), r = syn["minor"].get<double>();
        int nu = 128, nv = 64;
        TriMesh tm;
        for (int i = 0; i < nu; ++i)
            for (int j = 0; j < nv; ++j) {
                double u = 2 * M_PI * i / nu, v = 2 * M_PI * j / nv;
                tm.vertices.push_back(c + Vec3((R + r * std::cos(v)) * std::cos(u),
                                               (R + r * std::cos(v)) * std::sin(u), r * std::sin(v)));
            }
        auto id = [nu, nv](int i, int j) { return (i % nu) * nv + (j % nv); };
        for (int i = 0; i < nu; ++i)
            for (int j = 0; j < nv; ++j) {
                tm.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
                tm.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
            }
        add_tri_mesh(tm);
        return mesh;
    }
    throw ConfigError("config key 'eval.ground_truth' is required for shape '" + kind + "'");
}

std::vector<Pose> orbit_poses(const json& syn) {
    int frames = syn["frames"].get<int>();
    if (frames < 1) throw ConfigError("config key 'synthetic.frames' must be >= 1");
    Vec3 center = vec3_of(syn["center"], "synthetic.center");
    double dist = syn["camera_distance"].get<double>();
    require_positive(dist, "synthetic.camera_distance");
    std::vector<Pose> poses;
    for (int f = 0; f < frames; ++f) {
        double az = 2 * M_PI * f / frames;
        double el = (f % 2 == 0) ? 0.25 : -0.25;  // alternate above/below the equator
        Vec3 eye = center + dist * Vec3(std::cos(az) * std::cos(el), std::sin(az) * std::cos(el), std::sin(el));
        poses.push_back(look_at(eye, center));
    }
    return poses;
}

std::string frame_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06d.png", i);
    return buf;
}

void write_manifest(const fs::path& dir, const std::string& stage, const json& cfg, double wall_seconds) {
    json manifest{
        {"command", stage},
        {"config", cfg},
        {"seeds",
         {{"sampler", cfg["sampler"]["seed"]}, {"training", cfg["training"]["seed"]}, {"eval", cfg["eval"]["seed"]},
          {"noise", cfg["noise"]["seed"]}}},
        {"versions", {{"curvsdf", "1.0.0"}, {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                                          std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                                          std::to_string(EIGEN_MINOR_VERSION)}}},
        {"wall_time_seconds", wall_seconds},
    };
    std::ofstream out(dir / ("manifest_" + stage + ".json"));
    out << manifest.dump(2) << "\n";
}

struct Dataset {
    CameraConfig camera;
    std::vector<TrajectoryEntry> trajectory;
    std::vector<fs::path> depth_files;
};

Dataset load_dataset(const json& cfg) {
    const json& ds = cfg["dataset"];
    require_path(ds["intrinsics"], "dataset.intrinsics");
    require_path(ds["trajectory"], "dataset.trajectory");
    require_path(ds["depth_dir"], "dataset.depth_dir");

    Dataset data;
    data.camera = load_intrinsics(ds["intrinsics"]);
    data.trajectory = load_trajectory(ds["trajectory"]);
    for (const auto& entry : fs::directory_iterator(ds["depth_dir"].get<std::string>())) {
        auto ext = entry.path().extension();
        if (ext == ".png" || ext == ".pgm") data.depth_files.push_back(entry.path());
    }
    std::sort(data.depth_files.begin(), data.depth_files.end());
    if (data.depth_files.empty()) throw ConfigError("config key 'dataset.depth_dir': no depth images found");
    if (data.depth_files.size() > data.trajectory.size())
        throw ConfigError("config key 'dataset.trajectory': fewer poses than depth frames");
    return data;
}

VoxelGrid make_grid(const json& cfg) {
    const json& g = cfg["grid"];
    require_positive(g["voxel_size"].get<double>(), "grid.voxel_size");
    if (g["nx"].get<int>() < 2 || g["ny"].get<int>() < 2 || g["nz"].get<int>() < 2)
        throw ConfigError("config key 'grid.nx/ny/nz' must be >= 2");
    if (g["truncation"].get<int>() < 1) throw ConfigError("config key 'grid.truncation' must be >= 1");
    return VoxelGrid(vec3_of(g["center"], "grid.center"), g["nx"].get<int>(), g["ny"].get<int>(), g["nz"].get<int>(),
                     g["voxel_size"].get<double>(), g["truncation"].get<int>());
}

Pose perturb_pose(const Pose& pose, double sigma_deg, double sigma_t, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec3 axis(gauss(rng), gauss(rng), gauss(rng));
    if (axis.norm() < 1e-12) axis = Vec3(1, 0, 0);
    axis.normalize();
    double angle = sigma_deg * M_PI / 180.0 * gauss(rng);
    Vec3 dt(sigma_t * gauss(rng), sigma_t * gauss(rng), sigma_t * gauss(rng));
    Pose out;
    out.R = so3_exp(axis * angle) * pose.R;
    out.t = pose.t + dt;
    return out;
}

// ---- subcommands ----

void cmd_render(const json& cfg, const fs::path& out_dir) {
    const json& syn = cfg["synthetic"];
    Intrinsics in = synthetic_intrinsics(syn);
    auto shape = make_shape(syn);
    auto poses = orbit_poses(syn);
    double depth_scale = syn["depth_scale"].get<double>();
    require_positive(depth_scale, "synthetic.depth_scale");

    double sigma = cfg["noise"]["depth_sigma"].get<double>();
    std::mt19937_64 rng(cfg["noise"]["seed"].get<uint64_t>());
    std::normal_distribution<double> gauss(0.0, 1.0);

    fs::create_directories(out_dir / "depth");
    std::vector<TrajectoryEntry> traj;
    for (size_t f = 0; f < poses.size(); ++f) {
        DepthFrame frame = render_depth(*shape, poses[f], in);
        if (sigma > 0)
            for (size_t i = 0; i < frame.depth.data.size(); ++i)
                if (frame.valid.data[i]) frame.depth.data[i] = std::max(frame.depth.data[i] + sigma * gauss(rng), 1e-6);
        save_depth_frame(frame, depth_scale, (out_dir / "depth" / frame_name(static_cast<int>(f))).string());
        traj.push_back({static_cast<double>(f), poses[f]});
    }
    save_trajectory(traj, (out_dir / "trajectory.txt").string());
    save_intrinsics(CameraConfig{in, depth_scale}, (out_dir / "intrinsics.json").string());
}

VoxelGrid cmd_fuse(const json& cfg, const fs::path& out_dir) {
    Dataset data = load_dataset(cfg);
    VoxelGrid grid = make_grid(cfg);

    double sigma_deg = cfg["noise"]["pose_sigma_deg"].get<double>();
    double sigma_t = cfg["noise"]["pose_sigma_t"].get<double>();
    std::mt19937_64 rng(cfg["noise"]["seed"].get<uint64_t>());

    DiffGeoOptions dg;
    dg.max_depth_jump = 10 * grid.voxel_size();
    for (size_t f = 0; f < data.depth_files.size(); ++f) {
        DepthFrame frame =
            load_depth_frame(data.depth_files[f].string(), data.camera.depth_scale, data.camera.intrinsics);
        frame.pose = data.trajectory[f].pose;
        if (sigma_deg > 0 || sigma_t > 0) frame.pose = perturb_pose(frame.pose, sigma_deg, sigma_t, rng);
        NormalMap normals = normal_map(frame, dg);
        CurvatureMaps curv = curvature_maps(depth_derivatives(frame, dg));
        integrate_frame(grid, frame, normals, curv);
    }
    save_grid(grid, (out_dir / "grid.bin").string());
    SurfacePointSet pts = extract_points(grid, cfg["grid"]["w_min"].get<double>());
    save_points_ply(pts, (out_dir / "points.ply").string());
    return grid;
}

void cmd_track(const json& cfg, const fs::path& out_dir) {
    Dataset data = load_dataset(cfg);
    VoxelGrid grid = load_grid((out_dir / "grid.bin").string());

    double sigma_deg = cfg["noise"]["pose_sigma_deg"].get<double>();
    double sigma_t = cfg["noise"]["pose_sigma_t"].get<double>();
    std::mt19937_64 rng(cfg["noise"]["seed"].get<uint64_t>());

    TrackingOptions opts;
    opts.max_iters = cfg["tracking"]["max_iters"].get<int>();
    opts.tol = cfg["tracking"]["tol"].get<double>();

    std::vector<TrajectoryEntry> estimated;
    for (size_t f = 0; f < data.depth_files.size(); ++f) {
        DepthFrame frame =
            load_depth_frame(data.depth_files[f].string(), data.camera.depth_scale, data.camera.intrinsics);
        Pose init = data.trajectory[f].pose;
        if (sigma_deg > 0 || sigma_t > 0) init = perturb_pose(init, sigma_deg, sigma_t, rng);
        PoseEstimate est = estimate_pose(grid, frame, init, opts);
        estimated.push_back({data.trajectory[f].timestamp, est.pose});
    }
    save_trajectory(estimated, (out_dir / "trajectory_est.txt").string());
}

void cmd_sample_dump(const json& cfg, const fs::path& out_dir) {
    VoxelGrid grid = load_grid((out_dir / "grid.bin").string());
    const json& sc = cfg["sampler"];
    CurvatureThresholds th =
        curvature_thresholds(grid, sc["q_lo"].get<double>(), sc["q_hi"].get<double>(), sc["rank_percentile"].get<bool>());
    auto batch = stratified_batch(grid, sc["m"].get<int>(), th, sc["m_unobs"].get<int>(), sc["seed"].get<uint64_t>());
    dump_batch_csv(batch, (out_dir / "batch.csv").string());
}

NeuralField cmd_train(const json& cfg, const fs::path& out_dir) {
    VoxelGrid grid = load_grid((out_dir / "grid.bin").string());
    const json& tc = cfg["training"];

    TrainConfig train_cfg;
    train_cfg.epochs = tc["epochs"].get<int>();
    train_cfg.batch = tc["batch"].get<int>();
    train_cfg.lr = tc["lr"].get<double>();
    train_cfg.decay = tc["decay"].get<double>();
    train_cfg.seed = tc["seed"].get<uint64_t>();
    train_cfg.q_lo = cfg["sampler"]["q_lo"].get<double>();
    train_cfg.q_hi = cfg["sampler"]["q_hi"].get<double>();
    train_cfg.rank_percentile = cfg["sampler"]["rank_percentile"].get<bool>();
    train_cfg.weights.tau_n = tc["tau_n"].get<double>();
    train_cfg.weights.tau_w = tc["tau_w"].get<double>();
    train_cfg.weights.tau_e = tc["tau_e"].get<double>();

    std::string mode = tc["mode"];
    if (mode == "full") train_cfg.weights.mode = LossMode::Full;
    else if (mode == "point_cloud") train_cfg.weights.mode = LossMode::PointCloud;
    else if (mode == "neural_pull") train_cfg.weights.mode = LossMode::NeuralPull;
    else throw ConfigError("config key 'training.mode': expected full, point_cloud or neural_pull");

    std::string sampling = tc["sampling"];
    if (sampling == "stratified") train_cfg.sampling = SamplingStrategy::Stratified;
    else if (sampling == "uniform") train_cfg.sampling = SamplingStrategy::Uniform;
    else throw ConfigError("config key 'training.sampling': expected stratified or uniform");

    if (train_cfg.epochs < 1) throw ConfigError("config key 'training.epochs' must be >= 1");
    if (train_cfg.batch < 4) throw ConfigError("config key 'training.batch' must be >= 4");
    require_positive(train_cfg.lr, "training.lr");

    double init_radius = cfg["synthetic"]["radius"].get<double>();
    NeuralField net = init_network(tc["layers"].get<int>(), tc["width"].get<int>(), train_cfg.seed, init_radius);
    TrainResult result = train(net, grid, train_cfg);
    save_network(net, (out_dir / "checkpoint.cnet").string());
    save_loss_history(result.history, (out_dir / "loss.csv").string());
    return net;
}

UncertainMesh cmd_extract(const json& cfg, const fs::path& out_dir) {
    NeuralField net = load_network((out_dir / "checkpoint.cnet").string());
    VoxelGrid grid = load_grid((out_dir / "grid.bin").string());
    Vec3 lo, hi;
    grid.bounds(lo, hi);
    int res = cfg["extraction"]["res"].get<int>();
    if (res < 2) throw ConfigError("config key 'extraction.res' must be >= 2");
    double tau = cfg["extraction"]["tau"].get<double>();
    if (tau < 0 || tau >= 1) throw ConfigError("config key 'extraction.tau' must be in [0,1)");

    ScalarField field = evaluate_field(net, lo, hi, res, res, res);
    UncertainMesh mesh = marching_cubes_uncertain(field, tau);
    save_mesh_ply(mesh, (out_dir / "mesh.ply").string());
    return mesh;
}

void cmd_eval(const json& cfg, const fs::path& out_dir) {
    UncertainMesh mesh = load_mesh_ply((out_dir / "mesh.ply").string());
    if (mesh.triangles.empty()) throw std::runtime_error("eval: extracted mesh is empty");
    UncertainMesh gt = ground_truth_mesh(cfg);

    int n = cfg["eval"]["n"].get<int>();
    uint64_t seed = cfg["eval"]["seed"].get<uint64_t>();
    PointSample a = sample_mesh(mesh, n, seed, "reconstruction");
    PointSample b = sample_mesh(gt, n, seed + 1, "ground_truth");

    MetricsRow row;
    row.dataset = cfg["eval"]["dataset"];
    row.method = cfg["eval"]["method"];
    row.resolution = std::to_string(cfg["extraction"]["res"].get<int>());
    row.cd = chamfer(a, b);
    row.hd = hausdorff(a, b);
    row.n = n;
    row.seed = seed;
    save_metrics_csv({row}, (out_dir / "metrics.csv").string());
}

int run_stage(const std::string& name, const json& cfg, const fs::path& out_dir,
              const std::function<void()>& body) {
    auto t0 = std::chrono::steady_clock::now();
    try {
        body();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "stage '" << name << "' failed: " << e.what() << "\n";
        return 3;
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(out_dir, name, cfg, secs);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"curvature-guided neural SDF reconstruction pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--set", sets, "override config fields (dotted key=value)");

    const std::vector<std::string> commands = {"render", "fuse",    "track",   "sample-dump",
                                               "train",  "extract", "eval",    "pipeline"};
    for (const auto& c : commands) app.add_subcommand(c)->fallthrough();

    CLI11_PARSE(app, argc, argv);
    std::string command = app.get_subcommands().front()->get_name();

    if (const char* threads = std::getenv("CURVSDF_THREADS")) {
        int n = std::atoi(threads);
        if (n > 0) Eigen::setNbThreads(n);
    }

    json cfg = default_config();
    try {
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw ConfigError("cannot open config file: " + config_path);
            json file_cfg = json::parse(in, nullptr, true, true);
            merge_checked(cfg, file_cfg, "");
        }
        for (const auto& kv : sets) apply_set(cfg, kv);
        apply_preset(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    fs::path out_dir = cfg["output_dir"].get<std::string>();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        std::cerr << "config error: cannot create output_dir '" << out_dir.string() << "'\n";
        return 2;
    }

    if (command == "render") return run_stage("render", cfg, out_dir, [&] { cmd_render(cfg, out_dir); });
    if (command == "fuse") return run_stage("fuse", cfg, out_dir, [&] { cmd_fuse(cfg, out_dir); });
    if (command == "track") return run_stage("track", cfg, out_dir, [&] { cmd_track(cfg, out_dir); });
    if (command == "sample-dump")
        return run_stage("sample-dump", cfg, out_dir, [&] { cmd_sample_dump(cfg, out_dir); });
    if (command == "train") return run_stage("train", cfg, out_dir, [&] { cmd_train(cfg, out_dir); });
    if (command == "extract") return run_stage("extract", cfg, out_dir, [&] { cmd_extract(cfg, out_dir); });
    if (command == "eval") return run_stage("eval", cfg, out_dir, [&] { cmd_eval(cfg, out_dir); });
    if (command == "pipeline") {
        int rc = 0;
        if (cfg["dataset"]["depth_dir"].get<std::string>().empty()) {
            // no dataset given: render the synthetic scene first and fuse from it
            rc = run_stage("render", cfg, out_dir, [&] { cmd_render(cfg, out_dir); });
            cfg["dataset"]["depth_dir"] = (out_dir / "depth").string();
            cfg["dataset"]["trajectory"] = (out_dir / "trajectory.txt").string();
            cfg["dataset"]["intrinsics"] = (out_dir / "intrinsics.json").string();
        }
        if (rc == 0) rc = run_stage("fuse", cfg, out_dir, [&] { cmd_fuse(cfg, out_dir); });
        if (rc == 0) rc = run_stage("train", cfg, out_dir, [&] { cmd_train(cfg, out_dir); });
        if (rc == 0) rc = run_stage("extract", cfg, out_dir, [&] { cmd_extract(cfg, out_dir); });
        if (rc == 0) rc = run_stage("eval", cfg, out_dir, [&] { cmd_eval(cfg, out_dir); });
        return rc;
    }
    std::cerr << "config error: unknown command '" << command << "'\n";
    return 2;
}
