// dpif/trainer.cpp

// Copyright 2026  DPIF authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dpif/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dpif/pnm.hpp"

namespace dpif {

namespace fs = std::filesystem;

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch())
      .count();
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s)
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// PairSampler
// ---------------------------------------------------------------------------

PairSampler::PairSampler(const std::vector<ManifestEntry>& train_manifest)
    : manifest_(&train_manifest) {
  for (const auto& s : subjects_of(train_manifest)) classes_.push_back(s);
  std::sort(classes_.begin(), classes_.end());
  thermal_by_class_.resize(classes_.size());
  visible_by_class_.resize(classes_.size());
  for (size_t i = 0; i < train_manifest.size(); ++i) {
    const ManifestEntry& e = train_manifest[i];
    int label = label_of(e.subject_id);
    if (e.spectrum == Spectrum::thermal && e.pose_class == PoseClass::off_pose)
      thermal_by_class_[static_cast<size_t>(label)].push_back(i);
    if (e.spectrum == Spectrum::visible && e.pose_class == PoseClass::frontal)
      visible_by_class_[static_cast<size_t>(label)].push_back(i);
  }
  for (size_t c = 0; c < classes_.size(); ++c) {
    require(!thermal_by_class_[c].empty(), ErrorCode::invalid_argument,
            "training identity " + classes_[c] +
                " has no off-pose thermal imagery");
    require(!visible_by_class_[c].empty(), ErrorCode::invalid_argument,
            "training identity " + classes_[c] +
                " has no frontal visible imagery");
  }
}

int PairSampler::label_of(const std::string& subject) const {
  auto it = std::lower_bound(classes_.begin(), classes_.end(), subject);
  require(it != classes_.end() && *it == subject, ErrorCode::not_found,
          "unknown training subject " + subject);
  return static_cast<int>(it - classes_.begin());
}

std::vector<PairedSample> PairSampler::epoch(uint64_t seed,
                                             int epoch_index) const {
  Rng rng = Rng::keyed(seed, "phase2.pairs",
                       static_cast<uint64_t>(epoch_index));
  std::vector<PairedSample> pairs;
  for (size_t c = 0; c < classes_.size(); ++c) {
    for (size_t ti : thermal_by_class_[c]) {
      const auto& visibles = visible_by_class_[c];
      size_t vi = visibles[static_cast<size_t>(
          rng.index(static_cast<int64_t>(visibles.size())))];
      PairedSample p;
      p.thermal = &(*manifest_)[ti];
      p.visible = &(*manifest_)[vi];
      p.label = static_cast<int>(c);
      pairs.push_back(p);
    }
  }
  rng.shuffle(pairs);
  return pairs;
}

// ---------------------------------------------------------------------------
// FeatureCache
// ---------------------------------------------------------------------------

FeatureCache::FeatureCache(std::shared_ptr<const Backbone> backbone,
                           std::string root, bool standardize)
    : backbone_(std::move(backbone)),
      root_(std::move(root)),
      standardize_(standardize) {}

Tensor FeatureCache::single(const ManifestEntry& entry) {
  auto it = cache_.find(entry.path);
  if (it != cache_.end()) return it->second;
  Tensor img = load_image(root_ + "/" + entry.path,
                          backbone_->spec().input_size, standardize_);
  Tensor batch_in = reshape(img, {1, img.size(0), img.size(1), 3});
  Tensor feat = backbone_->forward(batch_in);
  cache_.emplace(entry.path, feat);
  return feat;
}

Tensor FeatureCache::batch(const std::vector<const ManifestEntry*>& entries) {
  require(!entries.empty(), ErrorCode::invalid_argument, "empty batch");
  Tensor first = single(*entries[0]);
  const Shape& fs = first.shape();  // [1, h, w, C]
  const int64_t per = first.numel();
  Tensor out = Tensor::zeros(
      {static_cast<int64_t>(entries.size()), fs[1], fs[2], fs[3]});
  auto& ov = out.vals<float>();
  for (size_t i = 0; i < entries.size(); ++i) {
    Tensor f = single(*entries[i]);
    const auto& fv = f.vals<float>();
    std::copy(fv.begin(), fv.end(), ov.begin() + static_cast<int64_t>(i) * per);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint io
// ---------------------------------------------------------------------------

namespace {
constexpr const char* kCkptMagic = "DPIFCKPT1";
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.is_open(), ErrorCode::io, "cannot write checkpoint " + path);
  out << kCkptMagic << "\n";
  out << "family = " << family_name(ckpt.family) << "\n";
  out << "truncation = " << ckpt.truncation << "\n";
  out << "embed_dim = " << ckpt.embed_dim << "\n";
  out << "groups = " << ckpt.groups << "\n";
  out << "f_inner = " << ckpt.f_inner << "\n";
  out << "act_f = " << act_name(ckpt.f_act) << "\n";
  out << "act_g = " << act_name(ckpt.g_act) << "\n";
  out << "num_classes = " << ckpt.num_classes << "\n";
  {
    std::string cs;
    for (size_t i = 0; i < ckpt.classes.size(); ++i) {
      if (i) cs += ",";
      cs += ckpt.classes[i];
    }
    out << "classes = " << cs << "\n";
  }
  out << "phase1_done = " << ckpt.phase1_done << "\n";
  out << "phase2_done = " << ckpt.phase2_done << "\n";
  out << "seed = " << ckpt.seed << "\n";
  for (const auto& h : ckpt.history)
    out << "history = " << h.phase << "," << h.epoch << "," << fmt_double(h.l_c)
        << "," << fmt_double(h.l_p) << "," << fmt_double(h.l) << "\n";
  out << "config_echo_begin\n" << ckpt.config_echo;
  if (!ckpt.config_echo.empty() && ckpt.config_echo.back() != '\n') out << "\n";
  out << "config_echo_end\n";
  out << "end_header\n";
  ckpt.tensors.save(out);
  require(out.good(), ErrorCode::io, "failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.is_open(), ErrorCode::io, "cannot open checkpoint " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == kCkptMagic,
          ErrorCode::bad_magic, path + " is not a checkpoint file");
  Checkpoint ckpt;
  bool in_echo = false;
  while (std::getline(in, line)) {
    if (line == "end_header") break;
    if (line == "config_echo_begin") {
      in_echo = true;
      continue;
    }
    if (line == "config_echo_end") {
      in_echo = false;
      continue;
    }
    if (in_echo) {
      ckpt.config_echo += line + "\n";
      continue;
    }
    size_t eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::io,
            path + ": malformed checkpoint header line '" + line + "'");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto strip = [](std::string& s) {
      while (!s.empty() && (s.front() == ' ')) s.erase(s.begin());
      while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.pop_back();
    };
    strip(key);
    strip(value);
    if (key == "family") {
      auto f = family_from_name(value);
      require(f.has_value(), ErrorCode::io, path + ": bad family " + value);
      ckpt.family = *f;
    } else if (key == "truncation") {
      ckpt.truncation = value;
    } else if (key == "embed_dim") {
      ckpt.embed_dim = std::stoi(value);
    } else if (key == "groups") {
      ckpt.groups = std::stoi(value);
    } else if (key == "f_inner") {
      ckpt.f_inner = std::stoi(value);
    } else if (key == "act_f" || key == "act_g") {
      auto a = act_from_name(value);
      require(a.has_value(), ErrorCode::io, path + ": bad activation " + value);
      (key == "act_f" ? ckpt.f_act : ckpt.g_act) = *a;
    } else if (key == "num_classes") {
      ckpt.num_classes = std::stoi(value);
    } else if (key == "classes") {
      ckpt.classes = split_csv(value);
    } else if (key == "phase1_done") {
      ckpt.phase1_done = std::stoi(value);
    } else if (key == "phase2_done") {
      ckpt.phase2_done = std::stoi(value);
    } else if (key == "seed") {
      ckpt.seed = static_cast<uint64_t>(std::stoull(value));
    } else if (key == "history") {
      auto fields = split_csv(value);
      require(fields.size() == 5, ErrorCode::io,
              path + ": malformed history line");
      EpochStats st;
      st.phase = std::stoi(fields[0]);
      st.epoch = std::stoi(fields[1]);
      st.l_c = std::stod(fields[2]);
      st.l_p = std::stod(fields[3]);
      st.l = std::stod(fields[4]);
      ckpt.history.push_back(st);
    } else {
      fail(ErrorCode::io, path + ": unknown checkpoint key '" + key + "'");
    }
  }
  ckpt.tensors = WeightStore::load(in);
  return ckpt;
}

DpitModel model_from_checkpoint(const Checkpoint& ckpt) {
  BackboneSpec spec = BackboneSpec::make(ckpt.family, ckpt.truncation);
  auto backbone = std::make_shared<Backbone>(
      Backbone::build(spec, ckpt.tensors));
  DpitModel model = DpitModel::build(backbone, ckpt.embed_dim, ckpt.groups,
                                     ckpt.f_inner, ckpt.f_act, ckpt.g_act,
                                     ckpt.num_classes, /*seed=*/0);
  model.load_head_weights(ckpt.tensors);
  return model;
}

void optimizer_state_to_store(const Optimizer& opt, WeightStore* store) {
  for (const auto& [name, st] : opt.state()) {
    int64_t n = static_cast<int64_t>(st.m.size());
    store->put("opt.m." + name, Tensor::from_f64({n}, st.m));
    store->put("opt.v." + name, Tensor::from_f64({n}, st.v));
    store->put("opt.t." + name,
               Tensor::from_f64({1}, {static_cast<double>(st.t)}));
  }
}

void optimizer_state_from_store(const WeightStore& store, Optimizer* opt) {
  opt->state().clear();
  for (const auto& [name, t] : store.entries()) {
    if (name.rfind("opt.m.", 0) != 0) continue;
    std::string pname = name.substr(6);
    Optimizer::MomentState st;
    st.m = t.vals<double>();
    st.v = store.at("opt.v." + pname).vals<double>();
    st.t = static_cast<int64_t>(store.at("opt.t." + pname).at(0));
    opt->state()[pname] = std::move(st);
  }
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

Trainer::Trainer(RunConfig cfg, Dataset dataset)
    : cfg_(std::move(cfg)), dataset_(std::move(dataset)), opt_(cfg_.train.optim) {
  require(cfg_.train.phase1_epochs > 0 && cfg_.train.phase2_epochs > 0,
          ErrorCode::invalid_argument, "epoch counts must be > 0");
  require(cfg_.train.batch_size > 0, ErrorCode::invalid_argument,
          "batch size must be > 0");
  require(cfg_.train.lambda >= 0.0, ErrorCode::invalid_argument,
          "lambda must be >= 0");
  BackboneSpec spec =
      BackboneSpec::make(cfg_.train.family, cfg_.train.truncation);
  backbone_ = std::make_shared<Backbone>(
      Backbone::build_seeded(spec, cfg_.train.seed));
  sampler_ = std::make_unique<PairSampler>(dataset_.train);
  model_ = std::make_unique<DpitModel>(DpitModel::build(
      backbone_, cfg_.train.embed_dim, cfg_.train.groups, cfg_.train.f_inner,
      cfg_.train.f_act, cfg_.train.g_act,
      static_cast<int>(sampler_->classes().size()), cfg_.train.seed));
  features_ = std::make_unique<FeatureCache>(backbone_, dataset_.root,
                                             cfg_.train.normalize_inputs);
}

Tensor Trainer::visible_embeddings(
    const std::vector<const ManifestEntry*>& entries) {
  return model_->visible_head(features_->batch(entries));
}

Tensor Trainer::thermal_embeddings(
    const std::vector<const ManifestEntry*>& entries) {
  return model_->thermal_head(features_->batch(entries));
}

void Trainer::train_phase1(int from_epoch) {
  std::vector<const ManifestEntry*> trainset;
  for (const auto& e : dataset_.train)
    if (e.spectrum == Spectrum::visible && e.pose_class == PoseClass::frontal)
      trainset.push_back(&e);
  require(!trainset.empty(), ErrorCode::invalid_argument,
          "phase 1 training set is empty (no frontal visible imagery)");
  require(subjects_of(dataset_.train).size() >= 2,
          ErrorCode::invalid_argument,
          "phase 1 needs at least two identities");
  model_->set_classifier_trainable(true);
  auto params = model_->phase1_params();
  if (from_epoch == 0) opt_ = Optimizer(cfg_.train.optim);
  for (int epoch = from_epoch; epoch < cfg_.train.phase1_epochs; ++epoch) {
    double t0 = now_seconds();
    std::vector<size_t> order(trainset.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng = Rng::keyed(cfg_.train.seed, "phase1.order",
                         static_cast<uint64_t>(epoch));
    rng.shuffle(order);
    double loss_sum = 0.0;
    int64_t seen = 0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(cfg_.train.batch_size)) {
      size_t stop = std::min(order.size(),
                             start + static_cast<size_t>(cfg_.train.batch_size));
      std::vector<const ManifestEntry*> batch;
      std::vector<int> labels;
      for (size_t i = start; i < stop; ++i) {
        batch.push_back(trainset[order[i]]);
        labels.push_back(sampler_->label_of(batch.back()->subject_id));
      }
      Tensor emb = visible_embeddings(batch);
      Tensor logits = model_->classify(emb);
      Tensor y = one_hot(labels, static_cast<int>(sampler_->classes().size()));
      Tensor loss = softmax_cross_entropy(logits, y);
      GradMap grads = collect_gradients(loss, model_->params());
      opt_.step(params, grads);
      loss_sum += loss.at(0) * static_cast<double>(batch.size());
      seen += static_cast<int64_t>(batch.size());
    }
    EpochStats st;
    st.phase = 1;
    st.epoch = epoch + 1;
    st.l_c = loss_sum / static_cast<double>(seen);
    st.l_p = 0.0;
    st.l = st.l_c;
    st.seconds = now_seconds() - t0;
    history_.push_back(st);
    phase1_done_ = epoch + 1;
    if (on_epoch) on_epoch(*this, st);
  }
  phase1_done_ = std::max(phase1_done_, cfg_.train.phase1_epochs);
}

void Trainer::train_phase2(int from_epoch) {
  require(phase1_done_ >= cfg_.train.phase1_epochs, ErrorCode::state,
          "phase 2 requires a completed phase 1");
  model_->set_classifier_trainable(false);
  auto params = model_->phase2_params();
  if (from_epoch == 0) opt_ = Optimizer(cfg_.train.optim);
  const int K = static_cast<int>(sampler_->classes().size());
  for (int epoch = from_epoch; epoch < cfg_.train.phase2_epochs; ++epoch) {
    double t0 = now_seconds();
    auto pairs = sampler_->epoch(cfg_.train.seed, epoch);
    double lc_sum = 0.0, lp_sum = 0.0, l_sum = 0.0;
    int64_t seen = 0;
    for (size_t start = 0; start < pairs.size();
         start += static_cast<size_t>(cfg_.train.batch_size)) {
      size_t stop = std::min(pairs.size(),
                             start + static_cast<size_t>(cfg_.train.batch_size));
      std::vector<const ManifestEntry*> thermal, visible;
      std::vector<int> labels;
      for (size_t i = start; i < stop; ++i) {
        require(pairs[i].thermal->subject_id == pairs[i].visible->subject_id,
                ErrorCode::invalid_argument,
                "unpaired batch row: " + pairs[i].thermal->subject_id +
                    " vs " + pairs[i].visible->subject_id);
        thermal.push_back(pairs[i].thermal);
        visible.push_back(pairs[i].visible);
        labels.push_back(pairs[i].label);
      }
      const LossConfig loss_cfg{cfg_.train.lambda,
                                cfg_.train.detach_visible_in_pose_loss};
      Tensor emb_t = thermal_embeddings(thermal);
      Tensor emb_v = visible_embeddings(visible);
      Tensor y = one_hot(labels, K);
      Tensor l_c = cross_spectrum_loss(emb_t, y, *model_);
      Tensor l_p = pose_correction_loss(
          loss_cfg.detach_visible ? detach(emb_v) : emb_v, emb_t);
      Tensor l = joint_loss(l_c, l_p, loss_cfg.lambda);
      GradMap grads = collect_gradients(l, model_->params());
      opt_.step(params, grads);
      const double n = static_cast<double>(thermal.size());
      lc_sum += l_c.at(0) * n;
      lp_sum += l_p.at(0) * n;
      l_sum += l.at(0) * n;
      seen += static_cast<int64_t>(n);
    }
    EpochStats st;
    st.phase = 2;
    st.epoch = epoch + 1;
    st.l_c = lc_sum / static_cast<double>(seen);
    st.l_p = lp_sum / static_cast<double>(seen);
    st.l = l_sum / static_cast<double>(seen);
    st.seconds = now_seconds() - t0;
    history_.push_back(st);
    phase2_done_ = epoch + 1;
    if (on_epoch) on_epoch(*this, st);
  }
}

Checkpoint Trainer::make_checkpoint() const {
  Checkpoint ckpt;
  ckpt.family = cfg_.train.family;
  ckpt.truncation = cfg_.train.truncation;
  ckpt.embed_dim = cfg_.train.embed_dim;
  ckpt.groups = cfg_.train.groups;
  ckpt.f_inner = cfg_.train.f_inner;
  ckpt.f_act = cfg_.train.f_act;
  ckpt.g_act = cfg_.train.g_act;
  ckpt.num_classes = static_cast<int>(sampler_->classes().size());
  ckpt.classes = sampler_->classes();
  ckpt.phase1_done = phase1_done_;
  ckpt.phase2_done = phase2_done_;
  ckpt.seed = cfg_.train.seed;
  ckpt.config_echo = cfg_.echo();
  ckpt.history = history_;
  WeightStore store = backbone_->weights();
  WeightStore head = model_->head_weights();
  for (const auto& [name, t] : head.entries())
    store.put(name, t.detached_copy());
  optimizer_state_to_store(opt_, &store);
  ckpt.tensors = std::move(store);
  return ckpt;
}

void Trainer::restore(const Checkpoint& ckpt) {
  require(ckpt.family == cfg_.train.family &&
              ckpt.truncation == cfg_.train.truncation &&
              ckpt.embed_dim == cfg_.train.embed_dim &&
              ckpt.groups == cfg_.train.groups &&
              ckpt.f_inner == cfg_.train.f_inner,
          ErrorCode::state, "checkpoint does not match the configured model");
  require(ckpt.classes == sampler_->classes(), ErrorCode::state,
          "checkpoint classes do not match the training manifest");
  BackboneSpec spec =
      BackboneSpec::make(cfg_.train.family, cfg_.train.truncation);
  backbone_ = std::make_shared<Backbone>(Backbone::build(spec, ckpt.tensors));
  model_ = std::make_unique<DpitModel>(DpitModel::build(
      backbone_, cfg_.train.embed_dim, cfg_.train.groups, cfg_.train.f_inner,
      cfg_.train.f_act, cfg_.train.g_act, ckpt.num_classes, cfg_.train.seed));
  model_->load_head_weights(ckpt.tensors);
  features_ = std::make_unique<FeatureCache>(backbone_, dataset_.root,
                                             cfg_.train.normalize_inputs);
  opt_ = Optimizer(cfg_.train.optim);
  optimizer_state_from_store(ckpt.tensors, &opt_);
  history_ = ckpt.history;
  phase1_done_ = ckpt.phase1_done;
  phase2_done_ = ckpt.phase2_done;
  if (phase1_done_ >= cfg_.train.phase1_epochs)
    model_->set_classifier_trainable(false);
}

// ---------------------------------------------------------------------------
// Pipeline entry points
// ---------------------------------------------------------------------------

TrainOutcome run_training(const RunConfig& cfg, const std::string& data_dir,
                          const std::string& out_dir,
                          const std::string& resume_checkpoint) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(fs::is_directory(out_dir), ErrorCode::io,
          "cannot create output directory " + out_dir);
  Dataset ds = Dataset::load(data_dir, cfg.train.frontal_yaw_threshold);
  Trainer trainer(cfg, std::move(ds));
  if (!resume_checkpoint.empty())
    trainer.restore(load_checkpoint(resume_checkpoint));

  const std::string ckpt_path = out_dir + "/checkpoint.dpif";
  const std::string log_path = out_dir + "/train_log.txt";
  std::ofstream log(log_path, std::ios::app);
  require(log.is_open(), ErrorCode::io, "cannot open log " + log_path);
  {
    std::ofstream echo(out_dir + "/config_echo.cfg");
    require(echo.is_open(), ErrorCode::io, "cannot write config echo");
    echo << cfg.echo();
  }
  trainer.on_epoch = [&](const Trainer& t, const EpochStats& st) {
    log << st.phase << "," << st.epoch << "," << fmt_double(st.l_c) << ","
        << fmt_double(st.l_p) << "," << fmt_double(st.l) << ","
        << fmt_double(st.seconds) << "\n";
    log.flush();
    save_checkpoint(t.make_checkpoint(), ckpt_path);
  };
  trainer.train_phase1(trainer.phase1_done());
  trainer.train_phase2(trainer.phase2_done());
  save_checkpoint(trainer.make_checkpoint(), ckpt_path);
  TrainOutcome outcome;
  outcome.checkpoint_path = ckpt_path;
  outcome.history = trainer.history();
  outcome.config_echo = cfg.echo();
  return outcome;
}

namespace {

EmbeddingSet compute_embeddings(const DpitModel& model, FeatureCache& cache,
                                const std::vector<ManifestEntry>& entries) {
  EmbeddingSet set;
  require(!entries.empty(), ErrorCode::invalid_argument,
          "cannot embed an empty entry list");
  const int64_t d = model.config().embed_dim;
  set.vectors = Tensor::zeros({static_cast<int64_t>(entries.size()), d});
  auto& out = set.vectors.vals<float>();
  const size_t chunk = 32;
  for (size_t start = 0; start < entries.size(); start += chunk) {
    size_t stop = std::min(entries.size(), start + chunk);
    std::vector<const ManifestEntry*> vis, thm;
    std::vector<size_t> vis_rows, thm_rows;
    for (size_t i = start; i < stop; ++i) {
      if (entries[i].spectrum == Spectrum::visible) {
        vis.push_back(&entries[i]);
        vis_rows.push_back(i);
      } else {
        thm.push_back(&entries[i]);
        thm_rows.push_back(i);
      }
    }
    auto scatter = [&](const Tensor& emb, const std::vector<size_t>& rows) {
      const auto& ev = emb.vals<float>();
      for (size_t r = 0; r < rows.size(); ++r)
        std::copy(ev.begin() + static_cast<int64_t>(r) * d,
                  ev.begin() + static_cast<int64_t>(r + 1) * d,
                  out.begin() + static_cast<int64_t>(rows[r]) * d);
    };
    if (!vis.empty()) scatter(model.visible_head(cache.batch(vis)), vis_rows);
    if (!thm.empty()) scatter(model.thermal_head(cache.batch(thm)), thm_rows);
  }
  for (const auto& e : entries) {
    set.subject_ids.push_back(e.subject_id);
    set.item_names.push_back(e.path);
  }
  return set;
}

}  // namespace

EvalOutcome run_eval(const std::string& checkpoint_path,
                     const std::string& data_dir,
                     const std::string& gallery_name,
                     const std::vector<std::string>& probe_names,
                     const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(fs::is_directory(out_dir), ErrorCode::io,
          "cannot create output directory " + out_dir);
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  RunConfig cfg = RunConfig::from_kv(KvConfig::parse(ckpt.config_echo));
  DpitModel model = model_from_checkpoint(ckpt);
  Dataset ds = Dataset::load(data_dir, cfg.train.frontal_yaw_threshold);
  Protocol proto = build_protocol(ds.test, standard_specs());
  FeatureCache cache(model.backbone_ptr(), ds.root,
                     cfg.train.normalize_inputs);
  const auto& gallery_entries = proto.at(gallery_name);
  require(!gallery_entries.empty(), ErrorCode::invalid_argument,
          "gallery " + gallery_name + " selects no imagery");
  EmbeddingSet gallery = compute_embeddings(model, cache, gallery_entries);
  EvalOutcome outcome;
  std::ostringstream table;
  table << "probe_set,gallery,AUC(%),EER(%),TAR@1%FAR,TAR@5%FAR\n";
  for (const auto& probe_name : probe_names) {
    const auto& probe_entries = proto.at(probe_name);
    require(!probe_entries.empty(), ErrorCode::invalid_argument,
            "probe set " + probe_name + " selects no imagery");
    EmbeddingSet probes = compute_embeddings(model, cache, probe_entries);
    ScoreMatrix matrix = build_score_matrix(probes, gallery);
    RocCurve roc = roc_curve(matrix);
    VerificationReport rep = report_from_roc(roc);
    IdentificationReport ident = identification_report(matrix, {1, 5});
    const std::string prefix =
        out_dir + "/" + sanitize(probe_name) + "_vs_" + sanitize(gallery_name);
    export_score_matrix(matrix, prefix + "_scores.csv");
    export_roc(roc, prefix + "_roc.csv");
    export_summary(rep, prefix + "_summary.csv");
    export_topk(ident, matrix.probe_ids, prefix + "_top5.csv");
    EvalRow row;
    row.probe_set = probe_name;
    row.gallery = gallery_name;
    row.verification = rep;
    row.rank1 = ident.rank_accuracy.at(1);
    row.rank5 = ident.rank_accuracy.at(5);
    row.excluded = ident.excluded;
    outcome.rows.push_back(row);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%s,%.2f,%.2f,%.2f,%.2f",
                  probe_name.c_str(), gallery_name.c_str(), rep.auc * 100.0,
                  rep.eer * 100.0, rep.tar_at_1pct_far * 100.0,
                  rep.tar_at_5pct_far * 100.0);
    table << buf << "\n";
  }
  outcome.table_text = table.str();
  std::ofstream tf(out_dir + "/verification_table.csv");
  require(tf.is_open(), ErrorCode::io, "cannot write verification table");
  tf << outcome.table_text;
  return outcome;
}

ScoreMatrix compute_score_matrix(const std::string& checkpoint_path,
                                 const std::string& data_dir,
                                 const std::string& gallery_name,
                                 const std::string& probe_name) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  RunConfig cfg = RunConfig::from_kv(KvConfig::parse(ckpt.config_echo));
  DpitModel model = model_from_checkpoint(ckpt);
  Dataset ds = Dataset::load(data_dir, cfg.train.frontal_yaw_threshold);
  Protocol proto = build_protocol(ds.test, standard_specs());
  FeatureCache cache(model.backbone_ptr(), ds.root,
                     cfg.train.normalize_inputs);
  EmbeddingSet gallery =
      compute_embeddings(model, cache, proto.at(gallery_name));
  EmbeddingSet probes = compute_embeddings(model, cache, proto.at(probe_name));
  return build_score_matrix(probes, gallery);
}

std::optional<AblationKind> ablation_kind_from_name(const std::string& s) {
  if (s == "embedding" || s == "embedding_size") return AblationKind::embedding_size;
  if (s == "lambda" || s == "lambda_sweep") return AblationKind::lambda_sweep;
  if (s == "activation" || s == "activation_combo")
    return AblationKind::activation_combo;
  if (s == "truncation" || s == "truncation_depth")
    return AblationKind::truncation_depth;
  return std::nullopt;
}

AblationOutcome run_ablation(AblationKind kind,
                             const std::vector<std::string>& grid,
                             const RunConfig& base, const std::string& data_dir,
                             const std::string& out_dir) {
  require(!grid.empty(), ErrorCode::invalid_argument,
          "ablation grid must be non-empty");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(fs::is_directory(out_dir), ErrorCode::io,
          "cannot create output directory " + out_dir);
  AblationOutcome outcome;
  for (const auto& value : grid) {
    RunConfig cfg = base;
    switch (kind) {
      case AblationKind::embedding_size: {
        static const std::vector<std::string> allowed = {"64", "128", "256",
                                                         "512", "1024"};
        require(std::find(allowed.begin(), allowed.end(), value) !=
                    allowed.end(),
                ErrorCode::invalid_argument,
                "embedding grid value must be one of 64,128,256,512,1024; got " +
                    value);
        cfg.train.embed_dim = std::stoi(value);
        break;
      }
      case AblationKind::lambda_sweep: {
        double l;
        try {
          l = std::stod(value);
        } catch (...) {
          fail(ErrorCode::invalid_argument, "bad lambda grid value " + value);
        }
        require(l >= 0.0, ErrorCode::invalid_argument,
                "lambda grid value must be >= 0; got " + value);
        cfg.train.lambda = l;
        break;
      }
      case AblationKind::activation_combo: {
        size_t dash = value.find('-');
        require(dash != std::string::npos, ErrorCode::invalid_argument,
                "activation combo must look like tanh-relu; got " + value);
        auto fa = act_from_name(value.substr(0, dash));
        auto ga = act_from_name(value.substr(dash + 1));
        require(fa.has_value() && ga.has_value(), ErrorCode::invalid_argument,
                "activation combo must name tanh/relu pairs; got " + value);
        cfg.train.f_act = *fa;
        cfg.train.g_act = *ga;
        break;
      }
      case AblationKind::truncation_depth: {
        auto points = BackboneSpec::truncation_points(cfg.train.family);
        require(std::find(points.begin(), points.end(), value) != points.end(),
                ErrorCode::invalid_argument,
                "truncation grid value " + value + " is not a boundary of " +
                    family_name(cfg.train.family));
        cfg.train.truncation = value;
        break;
      }
    }
    const std::string run_dir = out_dir + "/" + sanitize(value);
    TrainOutcome t = run_training(cfg, data_dir, run_dir);
    EvalOutcome e = run_eval(t.checkpoint_path, data_dir, cfg.eval_gallery,
                             split_csv(cfg.eval_probes), run_dir);
    // One combined row per grid point: average the probe-set reports.
    VerificationReport agg;
    for (const auto& row : e.rows) {
      agg.auc += row.verification.auc;
      agg.eer += row.verification.eer;
      agg.tar_at_1pct_far += row.verification.tar_at_1pct_far;
      agg.tar_at_5pct_far += row.verification.tar_at_5pct_far;
    }
    double n = static_cast<double>(e.rows.size());
    agg.auc /= n;
    agg.eer /= n;
    agg.tar_at_1pct_far /= n;
    agg.tar_at_5pct_far /= n;
    Checkpoint ckpt = load_checkpoint(t.checkpoint_path);
    DpitModel model = model_from_checkpoint(ckpt);
    model.set_classifier_trainable(true);  // count the assembled model
    AblationRow row;
    row.setting = value;
    row.verification = agg;
    row.trainable_params = model.count_trainable();
    outcome.rows.push_back(row);
  }
  outcome.table_path = out_dir + "/ablation.csv";
  std::ofstream out(outcome.table_path);
  require(out.is_open(), ErrorCode::io, "cannot write ablation table");
  out << "setting,auc,eer,tar_at_1pct_far,tar_at_5pct_far,trainable_params\n";
  for (const auto& row : outcome.rows) {
    out << row.setting << "," << fmt_double(row.verification.auc) << ","
        << fmt_double(row.verification.eer) << ","
        << fmt_double(row.verification.tar_at_1pct_far) << ","
        << fmt_double(row.verification.tar_at_5pct_far) << ","
        << row.trainable_params << "\n";
  }
  return outcome;
}

}  // namespace dpif
