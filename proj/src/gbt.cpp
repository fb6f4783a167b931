#include "gridcast/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "gridcast/kernels.hpp"
#include "gridcast/rng.hpp"

namespace gridcast {

namespace {

// Level-wise exact greedy tree builder over presorted feature orders.
// Samples are positions into the per-tree training subset.
class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& features, std::span<const int> rows,
              std::span<const double> gradients, const GbtHyperParams& hp)
      : features_(features), rows_(rows), grad_(gradients), hp_(hp) {
    const int s = static_cast<int>(rows.size());
    const int m = features.n_cols();
    sorted_.resize(static_cast<std::size_t>(m));
    for (int f = 0; f < m; ++f) {
      std::vector<int>& ord = sorted_[f];
      ord.resize(static_cast<std::size_t>(s));
      for (int i = 0; i < s; ++i) ord[i] = i;
      std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) {
        return features.at(rows[a], f) < features.at(rows[b], f);
      });
    }
  }

  RegressionTree build() {
    const int s = static_cast<int>(rows_.size());
    RegressionTree tree;
    node_of_.assign(static_cast<std::size_t>(s), 0);

    struct NodeStats {
      double sum = 0.0;
      int count = 0;
      int node_index = -1;  // index into tree.nodes
    };
    std::vector<NodeStats> level(1);
    level[0].node_index = 0;
    tree.nodes.push_back(TreeNode{});
    for (int i = 0; i < s; ++i) {
      level[0].sum += grad_[i];
      ++level[0].count;
    }

    for (int depth = 0; depth < hp_.max_depth && !level.empty(); ++depth) {
      const int n_nodes = static_cast<int>(level.size());
      // Per-node best split for this level. The floor only guards against
      // zero-gain splits; residuals near machine precision must still split
      // so boosting can memorize when regularization is off.
      std::vector<double> best_gain(n_nodes, 1e-30);
      std::vector<int> best_feature(n_nodes, -1);
      std::vector<double> best_thr(n_nodes, 0.0);

      std::vector<double> run_sum(n_nodes);
      std::vector<int> run_count(n_nodes);
      std::vector<double> last_value(n_nodes);

      const int m = features_.n_cols();
      for (int f = 0; f < m; ++f) {
        std::fill(run_sum.begin(), run_sum.end(), 0.0);
        std::fill(run_count.begin(), run_count.end(), 0);
        std::fill(last_value.begin(), last_value.end(),
                  -std::numeric_limits<double>::infinity());
        for (int pos : sorted_[f]) {
          const int node = node_of_[pos];
          if (node < 0) continue;
          const double value = features_.at(rows_[pos], f);
          const NodeStats& st = level[node];
          if (run_count[node] >= hp_.min_leaf && st.count - run_count[node] >= hp_.min_leaf &&
              value > last_value[node]) {
            const double sl = run_sum[node];
            const double sr = st.sum - sl;
            const int nl = run_count[node];
            const int nr = st.count - nl;
            const double gain = sl * sl / (nl + hp_.l2_leaf) + sr * sr / (nr + hp_.l2_leaf) -
                                st.sum * st.sum / (st.count + hp_.l2_leaf);
            if (gain > best_gain[node]) {
              best_gain[node] = gain;
              best_feature[node] = f;
              best_thr[node] = 0.5 * (last_value[node] + value);
            }
          }
          run_sum[node] += grad_[pos];
          ++run_count[node];
          last_value[node] = value;
        }
      }

      // Materialize splits; leaves keep feature = -1.
      std::vector<NodeStats> next;
      std::vector<int> child_base(n_nodes, -1);
      for (int nidx = 0; nidx < n_nodes; ++nidx) {
        TreeNode& tn = tree.nodes[level[nidx].node_index];
        if (best_feature[nidx] < 0) {
          tn.value = level[nidx].sum / (level[nidx].count + hp_.l2_leaf);
          continue;
        }
        tn.feature = best_feature[nidx];
        tn.threshold = best_thr[nidx];
        tn.left = static_cast<int>(tree.nodes.size());
        tn.right = tn.left + 1;
        tree.nodes.push_back(TreeNode{});
        tree.nodes.push_back(TreeNode{});
        child_base[nidx] = static_cast<int>(next.size());
        NodeStats l, r;
        l.node_index = tn.left;
        r.node_index = tn.right;
        next.push_back(l);
        next.push_back(r);
      }

      // Re-partition samples into children.
      for (int i = 0; i < s; ++i) {
        const int node = node_of_[i];
        if (node < 0 || child_base[node] < 0) {
          if (node >= 0 && child_base[node] < 0) node_of_[i] = -1;  // settled in a leaf
          continue;
        }
        const TreeNode& tn = tree.nodes[level[node].node_index];
        const bool go_left = features_.at(rows_[i], tn.feature) <= tn.threshold;
        const int child = child_base[node] + (go_left ? 0 : 1);
        next[child].sum += grad_[i];
        ++next[child].count;
        node_of_[i] = child;
      }
      level = std::move(next);
    }

    // Any nodes still open at max depth become leaves.
    for (const auto& st : level) {
      TreeNode& tn = tree.nodes[st.node_index];
      tn.value = st.sum / (st.count + hp_.l2_leaf);
    }
    return tree;
  }

 private:
  const FeatureMatrix& features_;
  std::span<const int> rows_;
  std::span<const double> grad_;
  const GbtHyperParams& hp_;
  std::vector<std::vector<int>> sorted_;  // per feature, sample positions ascending
  std::vector<int> node_of_;
};

double mean_of(std::span<const double> v) {
  return kern::sum(v) / static_cast<double>(v.size());
}

}  // namespace

std::vector<double> GbtModel::predict(const FeatureMatrix& features,
                                      std::span<const int> ids) const {
  if (features.n_cols() != n_features)
    throw std::invalid_argument("GbtModel::predict: feature schema mismatch");
  std::vector<double> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(predict_row(features.row(id)));
  return out;
}

double GbtModel::sum_squared_leaf_values() const {
  double s = 0.0;
  for (const RegressionTree& t : trees)
    for (const TreeNode& n : t.nodes)
      if (n.is_leaf()) s += n.value * n.value;
  return s;
}

std::string GbtModel::to_json() const {
  nlohmann::json j;
  j["base_score"] = base_score;
  j["learning_rate"] = learning_rate;
  j["n_features"] = n_features;
  j["hyperparams"] = {{"n_trees", hyperparams.n_trees},
                      {"learning_rate", hyperparams.learning_rate},
                      {"max_depth", hyperparams.max_depth},
                      {"min_leaf", hyperparams.min_leaf},
                      {"l2_leaf", hyperparams.l2_leaf},
                      {"subsample", hyperparams.subsample},
                      {"seed", hyperparams.seed}};
  nlohmann::json trees_json = nlohmann::json::array();
  for (const RegressionTree& t : trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const TreeNode& n : t.nodes) {
      if (n.is_leaf())
        nodes.push_back({{"value", n.value}});
      else
        nodes.push_back({{"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right}});
    }
    trees_json.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees_json);
  return j.dump(2);
}

GbtModel GbtModel::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  GbtModel m;
  m.base_score = j.at("base_score").get<double>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.n_features = j.at("n_features").get<int>();
  const auto& hp = j.at("hyperparams");
  m.hyperparams.n_trees = hp.at("n_trees").get<int>();
  m.hyperparams.learning_rate = hp.at("learning_rate").get<double>();
  m.hyperparams.max_depth = hp.at("max_depth").get<int>();
  m.hyperparams.min_leaf = hp.at("min_leaf").get<int>();
  m.hyperparams.l2_leaf = hp.at("l2_leaf").get<double>();
  m.hyperparams.subsample = hp.at("subsample").get<double>();
  m.hyperparams.seed = hp.at("seed").get<std::uint64_t>();
  for (const auto& tj : j.at("trees")) {
    RegressionTree t;
    for (const auto& nj : tj) {
      TreeNode n;
      if (nj.contains("value")) {
        n.value = nj.at("value").get<double>();
      } else {
        n.feature = nj.at("feature").get<int>();
        n.threshold = nj.at("threshold").get<double>();
        n.left = nj.at("left").get<int>();
        n.right = nj.at("right").get<int>();
      }
      t.nodes.push_back(n);
    }
    m.trees.push_back(std::move(t));
  }
  return m;
}

GbtModel gbt_train(const FeatureMatrix& features, std::span<const double> y,
                   std::span<const int> train_ids, const GbtHyperParams& hp) {
  const int s = static_cast<int>(train_ids.size());
  if (s < 2 * hp.min_leaf)
    throw std::invalid_argument("gbt_train: training set smaller than 2*min_leaf");
  for (int id : train_ids) {
    if (!std::isfinite(y[id])) throw std::invalid_argument("gbt_train: non-finite target");
    for (double v : features.row(id))
      if (!std::isfinite(v)) throw std::invalid_argument("gbt_train: non-finite feature");
  }

  GbtModel model;
  model.learning_rate = hp.learning_rate;
  model.n_features = features.n_cols();
  model.hyperparams = hp;

  std::vector<double> target(static_cast<std::size_t>(s));
  for (int i = 0; i < s; ++i) target[i] = y[train_ids[i]];
  model.base_score = mean_of(target);

  std::vector<double> residual(static_cast<std::size_t>(s));
  for (int i = 0; i < s; ++i) residual[i] = target[i] - model.base_score;

  const int sample_size =
      hp.subsample >= 1.0 ? s : std::max(2 * hp.min_leaf,
                                         static_cast<int>(std::floor(hp.subsample * s)));

  std::vector<double> sample_grad;
  std::vector<int> sample_global;
  for (int t = 0; t < hp.n_trees; ++t) {
    std::vector<int> positions;
    if (sample_size >= s) {
      positions.resize(static_cast<std::size_t>(s));
      for (int i = 0; i < s; ++i) positions[i] = i;
    } else {
      Rng rng(derive_seed(hp.seed, 0x5eed0000ULL + static_cast<std::uint64_t>(t)));
      positions = rng.sample_without_replacement(s, sample_size);
      std::sort(positions.begin(), positions.end());
    }
    sample_global.clear();
    sample_grad.clear();
    for (int p : positions) {
      sample_global.push_back(train_ids[p]);
      sample_grad.push_back(residual[p]);
    }

    TreeBuilder builder(features, sample_global, sample_grad, hp);
    RegressionTree tree = builder.build();

    // Stagewise update over the full training set.
    for (int i = 0; i < s; ++i)
      residual[i] -= hp.learning_rate * tree.predict_row(features.row(train_ids[i]));
    model.trees.push_back(std::move(tree));
  }
  return model;
}

EvalReport evaluate(std::span<const double> y, std::span<const double> yhat,
                    std::span<const int> eval_ids, std::span<const int> fold_of) {
  EvalReport rep;
  const std::size_t n = y.size();
  rep.residuals.assign(n, std::numeric_limits<double>::quiet_NaN());
  rep.predictions.assign(n, std::numeric_limits<double>::quiet_NaN());

  if (eval_ids.empty()) return rep;

  std::vector<double> yv, pv;
  yv.reserve(eval_ids.size());
  pv.reserve(eval_ids.size());
  for (std::size_t i = 0; i < eval_ids.size(); ++i) {
    const int id = eval_ids[i];
    yv.push_back(y[id]);
    pv.push_back(yhat[i]);
    rep.predictions[id] = yhat[i];
    rep.residuals[id] = y[id] - yhat[i];
  }

  auto mae_r2 = [](std::span<const double> yt, std::span<const double> yp)
      -> std::pair<double, std::optional<double>> {
    const double mae = kern::abs_diff_sum(yt, yp) / static_cast<double>(yt.size());
    const double mean = kern::sum(yt) / static_cast<double>(yt.size());
    const double sst = kern::sse_about(yt, mean);
    if (sst <= 0.0) return {mae, std::nullopt};
    double sse = 0.0;
    for (std::size_t i = 0; i < yt.size(); ++i) sse += (yt[i] - yp[i]) * (yt[i] - yp[i]);
    return {mae, 1.0 - sse / sst};
  };

  const auto [pooled_mae, pooled_r2] = mae_r2(yv, pv);
  rep.mae = pooled_mae;
  rep.r2 = pooled_r2;

  if (!fold_of.empty()) {
    int max_fold = -1;
    for (int id : eval_ids) max_fold = std::max(max_fold, fold_of[id]);
    for (int f = 0; f <= max_fold; ++f) {
      std::vector<double> fy, fp;
      for (std::size_t i = 0; i < eval_ids.size(); ++i) {
        if (fold_of[eval_ids[i]] != f) continue;
        fy.push_back(y[eval_ids[i]]);
        fp.push_back(yhat[i]);
      }
      if (fy.empty()) continue;
      auto [m, r] = mae_r2(fy, fp);
      rep.per_fold.push_back({f, m, r});
    }
  }
  return rep;
}

CvResult cross_validate(const FeatureMatrix& features, std::span<const double> y,
                        const FoldAssignment& folds, const GbtHyperParams& hp) {
  if (folds.n_folds < 2) throw std::invalid_argument("cross_validate: need >= 2 folds");
  const int n = static_cast<int>(y.size());

  CvResult cv;
  cv.fold_models.reserve(folds.n_folds);
  std::vector<int> eval_ids;
  std::vector<double> eval_pred;
  for (int f = 0; f < folds.n_folds; ++f) {
    std::vector<int> train_ids, test_ids;
    for (int i = 0; i < n; ++i)
      (folds.fold[i] == f ? test_ids : train_ids).push_back(i);
    if (test_ids.empty()) throw std::runtime_error("cross_validate: fold with zero cells");

    GbtModel model = gbt_train(features, y, train_ids, hp);
    const std::vector<double> pred = model.predict(features, test_ids);
    eval_ids.insert(eval_ids.end(), test_ids.begin(), test_ids.end());
    eval_pred.insert(eval_pred.end(), pred.begin(), pred.end());

    std::vector<double> train_res;
    train_res.reserve(train_ids.size());
    const std::vector<double> train_pred = model.predict(features, train_ids);
    for (std::size_t i = 0; i < train_ids.size(); ++i)
      train_res.push_back(y[train_ids[i]] - train_pred[i]);

    cv.fold_models.push_back(std::move(model));
    cv.train_ids_per_fold.push_back(std::move(train_ids));
    cv.train_residuals_per_fold.push_back(std::move(train_res));
  }
  cv.report = evaluate(y, eval_pred, eval_ids, folds.fold);
  return cv;
}

std::vector<LearningCurvePoint> learning_curve(const FeatureMatrix& features,
                                               std::span<const double> y,
                                               const FoldAssignment& folds,
                                               std::span<const double> sizes,
                                               const GbtHyperParams& hp) {
  if (folds.n_folds < 2) throw std::invalid_argument("learning_curve: need >= 2 folds");
  const int n = static_cast<int>(y.size());

  std::vector<LearningCurvePoint> out;
  for (std::size_t si = 0; si < sizes.size(); ++si) {
    const double size = sizes[si];
    if (size <= 0.0 || size > 1.0)
      throw std::invalid_argument("learning_curve: sizes must lie in (0, 1]");
    std::vector<double> train_maes, val_maes;
    for (int f = 0; f < folds.n_folds; ++f) {
      std::vector<int> train_ids, test_ids;
      for (int i = 0; i < n; ++i)
        (folds.fold[i] == f ? test_ids : train_ids).push_back(i);

      std::vector<int> used = train_ids;
      if (size < 1.0) {
        const int keep = static_cast<int>(std::floor(size * train_ids.size()));
        if (keep < 2 * hp.min_leaf)
          throw std::invalid_argument("learning_curve: size yields too few training cells");
        Rng rng(derive_seed(hp.seed, 0xca11ULL + 1000 * f + si));
        std::vector<int> pick = rng.sample_without_replacement(
            static_cast<int>(train_ids.size()), keep);
        used.clear();
        for (int p : pick) used.push_back(train_ids[p]);
        std::sort(used.begin(), used.end());
      }

      const GbtModel model = gbt_train(features, y, used, hp);
      const std::vector<double> tp = model.predict(features, used);
      const std::vector<double> vp = model.predict(features, test_ids);
      double tmae = 0.0, vmae = 0.0;
      for (std::size_t i = 0; i < used.size(); ++i) tmae += std::fabs(y[used[i]] - tp[i]);
      for (std::size_t i = 0; i < test_ids.size(); ++i)
        vmae += std::fabs(y[test_ids[i]] - vp[i]);
      train_maes.push_back(tmae / used.size());
      val_maes.push_back(vmae / test_ids.size());
    }

    auto mean_sd = [](std::span<const double> v) {
      const double mean = kern::sum(v) / static_cast<double>(v.size());
      const double sd = std::sqrt(kern::sse_about(v, mean) / static_cast<double>(v.size()));
      return std::make_pair(mean, sd);
    };
    LearningCurvePoint p;
    p.size = size;
    std::tie(p.train_mae_mean, p.train_mae_sd) = mean_sd(train_maes);
    std::tie(p.val_mae_mean, p.val_mae_sd) = mean_sd(val_maes);
    out.push_back(p);
  }
  return out;
}

}  // namespace gridcast
