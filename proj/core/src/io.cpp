#include "exporec/io.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <type_traits>

#include <json.hpp>

namespace exporec::io {

using nlohmann::json;

std::string fmt_double(double x) {
  char buf[32];
  // %.17g round-trips every double; trim to the shortest form that does.
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open for reading: " + path.string());
  return in;
}

}  // namespace

void write_impressions_csv(const std::filesystem::path& path,
                           const std::vector<ImpressionRecord>& records) {
  std::ofstream out = open_out(path);
  out << "round,user_id,item_id,label\n";
  for (const auto& rec : records) {
    out << rec.round << ',' << rec.user_id << ',' << rec.item_id << ','
        << (rec.label == Feedback::Positive ? "positive" : "negative") << '\n';
  }
}

std::vector<ImpressionRecord> read_impressions_csv(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::vector<ImpressionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != "round,user_id,item_id,label")
        throw DataError("line 1: expected header round,user_id,item_id,label");
      continue;
    }
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string f0, f1, f2, f3;
    if (!std::getline(ss, f0, ',') || !std::getline(ss, f1, ',') ||
        !std::getline(ss, f2, ',') || !std::getline(ss, f3))
      throw DataError("line " + std::to_string(line_no) + ": expected 4 fields");
    ImpressionRecord rec;
    const auto parse_u32 = [&](const std::string& s, const char* what) {
      std::uint32_t v = 0;
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || p != s.data() + s.size())
        throw DataError("line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
      return v;
    };
    rec.round = parse_u32(f0, "round");
    rec.user_id = parse_u32(f1, "user_id");
    rec.item_id = parse_u32(f2, "item_id");
    if (f3 == "positive")
      rec.label = Feedback::Positive;
    else if (f3 == "negative")
      rec.label = Feedback::NegativeImpression;
    else
      throw DataError("line " + std::to_string(line_no) + ": bad label '" + f3 + "'");
    records.push_back(rec);
  }
  return records;
}

namespace {

json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from_json(const json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  m.data() = j.at("data").get<std::vector<double>>();
  if (m.data().size() != m.rows() * m.cols()) throw DataError("matrix data size mismatch");
  return m;
}

}  // namespace

void save_world(const std::filesystem::path& path, const World& world) {
  json j;
  j["format"] = "exporec-world";
  j["version"] = 1;
  j["config"] = {{"n_users", world.config.n_users},
                 {"n_items", world.config.n_items},
                 {"latent_dim", world.config.latent_dim},
                 {"affinity_scale", world.config.affinity_scale},
                 {"popularity_skew", world.config.popularity_skew},
                 {"quality_noise", world.config.quality_noise},
                 {"seed", world.config.seed}};
  j["user_factors"] = matrix_to_json(world.user_factors);
  j["item_factors"] = matrix_to_json(world.item_factors);
  j["item_bias"] = world.item_bias;
  open_out(path) << j.dump(2) << '\n';
}

World load_world(const std::filesystem::path& path) {
  json j = json::parse(open_in(path), nullptr, true);
  if (j.value("format", "") != "exporec-world" || j.value("version", 0) != 1)
    throw DataError("unrecognized world snapshot: " + path.string());
  World world;
  const json& c = j.at("config");
  world.config.n_users = c.at("n_users").get<std::size_t>();
  world.config.n_items = c.at("n_items").get<std::size_t>();
  world.config.latent_dim = c.at("latent_dim").get<std::size_t>();
  world.config.affinity_scale = c.at("affinity_scale").get<double>();
  world.config.popularity_skew = c.at("popularity_skew").get<double>();
  world.config.quality_noise = c.at("quality_noise").get<double>();
  world.config.seed = c.at("seed").get<std::uint64_t>();
  world.user_factors = matrix_from_json(j.at("user_factors"));
  world.item_factors = matrix_from_json(j.at("item_factors"));
  world.item_bias = j.at("item_bias").get<std::vector<double>>();
  return world;
}

void save_params(const std::filesystem::path& path, const ModelParams& params) {
  json j;
  j["format"] = "exporec-model";
  j["version"] = 1;
  j["n_users"] = params.n_users;
  j["n_items"] = params.n_items;
  j["d"] = params.d;
  j["d_e"] = params.d_e;
  j["fingerprint"] = params.fingerprint();
  j["user_eng"] = matrix_to_json(params.user_eng);
  j["item_eng"] = matrix_to_json(params.item_eng);
  j["item_eng_bias"] = params.item_eng_bias;
  j["user_exp"] = matrix_to_json(params.user_exp);
  j["item_exp"] = matrix_to_json(params.item_exp);
  j["item_exp_bias"] = params.item_exp_bias;
  open_out(path) << j.dump() << '\n';
}

ModelParams load_params(const std::filesystem::path& path) {
  json j = json::parse(open_in(path), nullptr, true);
  if (j.value("format", "") != "exporec-model" || j.value("version", 0) != 1)
    throw DataError("unrecognized model snapshot: " + path.string());
  ModelParams p;
  p.n_users = j.at("n_users").get<std::size_t>();
  p.n_items = j.at("n_items").get<std::size_t>();
  p.d = j.at("d").get<std::size_t>();
  p.d_e = j.at("d_e").get<std::size_t>();
  p.user_eng = matrix_from_json(j.at("user_eng"));
  p.item_eng = matrix_from_json(j.at("item_eng"));
  p.item_eng_bias = j.at("item_eng_bias").get<std::vector<double>>();
  p.user_exp = matrix_from_json(j.at("user_exp"));
  p.item_exp = matrix_from_json(j.at("item_exp"));
  p.item_exp_bias = j.at("item_exp_bias").get<std::vector<double>>();
  if (j.contains("fingerprint") && j.at("fingerprint").get<std::uint64_t>() != p.fingerprint())
    throw DataError("model snapshot fingerprint mismatch: " + path.string());
  return p;
}

void write_loss_trace_csv(const std::filesystem::path& path,
                          const std::vector<EpochStats>& trace) {
  std::ofstream out = open_out(path);
  out << "epoch,mean_engagement_bce,mean_exposure_bce,total\n";
  for (const auto& e : trace) {
    out << e.epoch << ',' << fmt_double(e.mean_engagement_bce) << ','
        << fmt_double(e.mean_exposure_bce) << ',' << fmt_double(e.total) << '\n';
  }
}

void write_retrievals_csv(const std::filesystem::path& path, const Retrievals& retrievals,
                          const RetrievalIndex& index, const ModelParams& params) {
  std::ofstream out = open_out(path);
  out << "user_id,rank,item_id,score\n";
  for (const auto& [user, items] : retrievals) {
    for (std::size_t rank = 0; rank < items.size(); ++rank) {
      out << user << ',' << rank << ',' << items[rank] << ','
          << fmt_double(composite_score(index, params, user, items[rank])) << '\n';
    }
  }
}

void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result) {
  std::ofstream out = open_out(path);
  out << "model,gamma,seed,positive_recall,negative_recall,unique_retrieved,"
         "popular_dominance,exposure_gini,k,n_eval_users,model_fingerprint\n";
  const auto row = [&](const char* model, const SweepCell& cell) {
    out << model << ',' << fmt_double(cell.gamma) << ',' << cell.seed << ','
        << fmt_double(cell.report.positive_recall_at_k) << ','
        << fmt_double(cell.report.negative_recall_at_k) << ',' << cell.report.unique_retrieved
        << ',' << fmt_double(cell.report.popular_dominance) << ','
        << fmt_double(cell.report.exposure_gini) << ',' << cell.report.k << ','
        << cell.report.n_eval_users << ',' << cell.model_fingerprint << '\n';
  };
  for (const auto& cell : result.cells) row("corrected", cell);
  for (const auto& cell : result.opc) row("opc", cell);
}

namespace {

void aggregate_row(std::ofstream& out, const char* model, const MetricAggregate& agg) {
  out << model << ',' << fmt_double(agg.gamma) << ','
      << fmt_double(agg.positive_recall_mean) << ',' << fmt_double(agg.positive_recall_sd)
      << ',' << fmt_double(agg.negative_recall_mean) << ','
      << fmt_double(agg.negative_recall_sd) << ',' << fmt_double(agg.unique_retrieved_mean)
      << ',' << fmt_double(agg.unique_retrieved_sd) << ','
      << fmt_double(agg.popular_dominance_mean) << ',' << fmt_double(agg.popular_dominance_sd)
      << ',' << fmt_double(agg.exposure_gini_mean) << ',' << fmt_double(agg.exposure_gini_sd)
      << '\n';
}

}  // namespace

void write_aggregate_csv(const std::filesystem::path& path, const SweepResult& result) {
  std::ofstream out = open_out(path);
  out << "model,gamma,positive_recall_mean,positive_recall_sd,negative_recall_mean,"
         "negative_recall_sd,unique_retrieved_mean,unique_retrieved_sd,"
         "popular_dominance_mean,popular_dominance_sd,exposure_gini_mean,exposure_gini_sd\n";
  for (const auto& agg : result.aggregates) aggregate_row(out, "corrected", agg);
  if (!result.opc.empty()) aggregate_row(out, "opc", result.opc_aggregate);
}

void write_sweep_long_csv(const std::filesystem::path& path, const SweepResult& result) {
  std::ofstream out = open_out(path);
  out << "gamma,metric,mean,sd\n";
  for (const auto& agg : result.aggregates) {
    const auto row = [&](const char* metric, double mean, double sd) {
      out << fmt_double(agg.gamma) << ',' << metric << ',' << fmt_double(mean) << ','
          << fmt_double(sd) << '\n';
    };
    row("positive_recall", agg.positive_recall_mean, agg.positive_recall_sd);
    row("negative_recall", agg.negative_recall_mean, agg.negative_recall_sd);
    row("unique_retrieved", agg.unique_retrieved_mean, agg.unique_retrieved_sd);
    row("popular_dominance", agg.popular_dominance_mean, agg.popular_dominance_sd);
    row("exposure_gini", agg.exposure_gini_mean, agg.exposure_gini_sd);
  }
}

void write_chosen_gamma_json(const std::filesystem::path& path, const GammaChoice& choice) {
  json j;
  j["gamma"] = choice.gamma;
  j["positive_recall_mean"] = choice.aggregate.positive_recall_mean;
  j["positive_recall_sd"] = choice.aggregate.positive_recall_sd;
  j["negative_recall_mean"] = choice.aggregate.negative_recall_mean;
  j["negative_recall_sd"] = choice.aggregate.negative_recall_sd;
  open_out(path) << j.dump(2) << '\n';
}

void write_loop_trace_csv(const std::filesystem::path& path, const ClosedLoopResult& result) {
  std::ofstream out = open_out(path);
  out << "seed,round,has_model,exposure_gini,positive_recall,negative_recall,"
         "unique_retrieved,popular_dominance\n";
  for (std::size_t s = 0; s < result.seeds.size(); ++s) {
    for (const auto& t : result.traces[s]) {
      out << result.seeds[s] << ',' << t.round << ',' << (t.has_model ? 1 : 0) << ','
          << fmt_double(t.exposure_gini) << ',';
      if (t.has_model) {
        out << fmt_double(t.positive_recall) << ',' << fmt_double(t.negative_recall) << ','
            << t.unique_retrieved << ',' << fmt_double(t.popular_dominance);
      } else {
        out << ",,,";
      }
      out << '\n';
    }
  }
}

namespace {

// Environment overrides: EXPOREC_<SECTION>_<FIELD> or EXPOREC_<FIELD>.
bool env_lookup(const std::string& key, std::string& value) {
  const char* v = std::getenv(key.c_str());
  if (v == nullptr) return false;
  value = v;
  return true;
}

template <typename T>
void env_override(const std::string& key, T& field) {
  std::string raw;
  if (!env_lookup(key, raw)) return;
  try {
    if constexpr (std::is_same_v<T, double>) {
      field = std::stod(raw);
    } else {
      field = static_cast<T>(std::stoull(raw));
    }
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": '" + raw + "'");
  }
}

void apply_env_overrides(ExperimentConfig& c) {
  env_override("EXPOREC_WORLD_N_USERS", c.world.n_users);
  env_override("EXPOREC_WORLD_N_ITEMS", c.world.n_items);
  env_override("EXPOREC_WORLD_LATENT_DIM", c.world.latent_dim);
  env_override("EXPOREC_WORLD_AFFINITY_SCALE", c.world.affinity_scale);
  env_override("EXPOREC_WORLD_POPULARITY_SKEW", c.world.popularity_skew);
  env_override("EXPOREC_WORLD_QUALITY_NOISE", c.world.quality_noise);
  env_override("EXPOREC_WORLD_SEED", c.world.seed);
  env_override("EXPOREC_TRAIN_EXPOSURE_TASK_WEIGHT", c.train.exposure_task_weight);
  env_override("EXPOREC_TRAIN_LEARNING_RATE", c.train.learning_rate);
  env_override("EXPOREC_TRAIN_EPOCHS", c.train.epochs);
  env_override("EXPOREC_TRAIN_BATCH_SIZE", c.train.batch_size);
  env_override("EXPOREC_TRAIN_RANDOM_NEGATIVES_PER_RECORD",
               c.train.random_negatives_per_record);
  env_override("EXPOREC_TRAIN_EMBED_DIM", c.train.embed_dim);
  env_override("EXPOREC_TRAIN_EXPOSURE_EMBED_DIM", c.train.exposure_embed_dim);
  env_override("EXPOREC_TRAIN_L2_REG", c.train.l2_reg);
  env_override("EXPOREC_SCORING_GAMMA", c.scoring.gamma);
  env_override("EXPOREC_SCORING_K", c.scoring.k);
  env_override("EXPOREC_ROUNDS", c.rounds);
  env_override("EXPOREC_SLATE_SIZE", c.slate_size);
  env_override("EXPOREC_EXPLORATION_EPSILON", c.exploration_epsilon);
  env_override("EXPOREC_HOLDOUT_ROUNDS", c.holdout_rounds);
  env_override("EXPOREC_TOP_FRACTION", c.top_fraction);
  env_override("EXPOREC_PROPENSITY_CLIP", c.propensity_clip);
}

template <typename T>
void read_field(const json& j, const char* key, T& field, const std::string& prefix) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for " + prefix + key);
  }
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  if (j.contains("world")) {
    const json& w = j.at("world");
    read_field(w, "n_users", c.world.n_users, "world.");
    read_field(w, "n_items", c.world.n_items, "world.");
    read_field(w, "latent_dim", c.world.latent_dim, "world.");
    read_field(w, "affinity_scale", c.world.affinity_scale, "world.");
    read_field(w, "popularity_skew", c.world.popularity_skew, "world.");
    read_field(w, "quality_noise", c.world.quality_noise, "world.");
    read_field(w, "seed", c.world.seed, "world.");
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    read_field(t, "exposure_task_weight", c.train.exposure_task_weight, "train.");
    read_field(t, "learning_rate", c.train.learning_rate, "train.");
    read_field(t, "epochs", c.train.epochs, "train.");
    read_field(t, "batch_size", c.train.batch_size, "train.");
    read_field(t, "random_negatives_per_record", c.train.random_negatives_per_record,
               "train.");
    read_field(t, "embed_dim", c.train.embed_dim, "train.");
    read_field(t, "exposure_embed_dim", c.train.exposure_embed_dim, "train.");
    read_field(t, "l2_reg", c.train.l2_reg, "train.");
  }
  if (j.contains("scoring")) {
    const json& s = j.at("scoring");
    read_field(s, "gamma", c.scoring.gamma, "scoring.");
    read_field(s, "k", c.scoring.k, "scoring.");
  }
  read_field(j, "rounds", c.rounds, "");
  read_field(j, "slate_size", c.slate_size, "");
  read_field(j, "exploration_epsilon", c.exploration_epsilon, "");
  read_field(j, "gamma_grid", c.gamma_grid, "");
  read_field(j, "holdout_rounds", c.holdout_rounds, "");
  read_field(j, "seeds", c.seeds, "");
  read_field(j, "top_fraction", c.top_fraction, "");
  read_field(j, "propensity_clip", c.propensity_clip, "");

  apply_env_overrides(c);
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str());
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
  json j;
  j["world"] = {{"n_users", c.world.n_users},
                {"n_items", c.world.n_items},
                {"latent_dim", c.world.latent_dim},
                {"affinity_scale", c.world.affinity_scale},
                {"popularity_skew", c.world.popularity_skew},
                {"quality_noise", c.world.quality_noise},
                {"seed", c.world.seed}};
  j["train"] = {{"exposure_task_weight", c.train.exposure_task_weight},
                {"learning_rate", c.train.learning_rate},
                {"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"random_negatives_per_record", c.train.random_negatives_per_record},
                {"embed_dim", c.train.embed_dim},
                {"exposure_embed_dim", c.train.exposure_embed_dim},
                {"l2_reg", c.train.l2_reg}};
  j["scoring"] = {{"gamma", c.scoring.gamma}, {"k", c.scoring.k}};
  j["rounds"] = c.rounds;
  j["slate_size"] = c.slate_size;
  j["exploration_epsilon"] = c.exploration_epsilon;
  j["gamma_grid"] = c.gamma_grid;
  j["holdout_rounds"] = c.holdout_rounds;
  j["seeds"] = c.seeds;
  j["top_fraction"] = c.top_fraction;
  j["propensity_clip"] = c.propensity_clip;
  return j.dump(2);
}

}  // namespace exporec::io
