#include "idtrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "idtrack/utils.hpp"

namespace idtrack {

std::vector<std::pair<int, int>> hungarian(const Mat& cost) {
    const int rows = static_cast<int>(cost.rows());
    const int cols = static_cast<int>(cost.cols());
    if (rows == 0 || cols == 0) return {};
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            if (!std::isfinite(cost(r, c)))
                throw DataError("hungarian: non-finite cost at (" + std::to_string(r) + "," +
                                std::to_string(c) + ")");

    // Pad to square with zero-cost dummies; dummy pairings are discarded at
    // the end, leaving a min-cost assignment of size min(rows, cols).
    const int n = std::max(rows, cols);
    const double inf = std::numeric_limits<double>::infinity();
    auto at = [&](int r, int c) -> double {
        return (r < rows && c < cols) ? cost(r, c) : 0.0;
    };

    // Potentials-based shortest augmenting path, O(n^3).
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = 0;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<std::pair<int, int>> pairs;
    for (int j = 1; j <= n; ++j) {
        int r = p[j] - 1, c = j - 1;
        if (r < rows && c < cols) pairs.emplace_back(r, c);
    }
    std::sort(pairs.begin(), pairs.end());
    return pairs;
}

FrameMatch match_frame(const std::vector<Box>& pred, const std::vector<Box>& gt,
                       double iou_threshold) {
    for (const auto& b : pred)
        if (b.w <= 0.f || b.h <= 0.f) throw DataError("match_frame: non-positive pred box");
    for (const auto& b : gt)
        if (b.w <= 0.f || b.h <= 0.f) throw DataError("match_frame: non-positive gt box");

    const int np = static_cast<int>(pred.size());
    const int ng = static_cast<int>(gt.size());
    FrameMatch out;
    if (np == 0 || ng == 0) {
        out.fp = np;
        out.fn = ng;
        return out;
    }
    // Eligible pairs get a large negative bonus so match cardinality
    // dominates; among maximum matchings the solver minimizes sum(1 - IoU).
    // Ineligible pairs cost 0, same as staying unmatched via dummy padding.
    const double bonus = 2.0 * (np + ng) + 10.0;
    Mat cost = Mat::Zero(np, ng);
    for (int i = 0; i < np; ++i)
        for (int j = 0; j < ng; ++j) {
            double ov = iou(pred[i], gt[j]);
            if (ov >= iou_threshold) cost(i, j) = (1.0 - ov) - bonus;
        }
    for (auto [i, j] : hungarian(cost))
        if (cost(i, j) < 0.0) out.pairs.emplace_back(i, j);
    out.fp = np - static_cast<int>(out.pairs.size());
    out.fn = ng - static_cast<int>(out.pairs.size());
    return out;
}

namespace {

using FrameMap = std::map<int, std::vector<MotLine>>;

FrameMap by_frame(const std::vector<MotLine>& lines) {
    FrameMap m;
    for (const auto& l : lines) m[l.frame].push_back(l);
    return m;
}

}  // namespace

EvalCounts evaluate_sequence(const std::vector<MotLine>& pred, const std::vector<MotLine>& gt,
                             double iou_threshold) {
    EvalCounts c;
    c.gt_total = static_cast<long>(gt.size());
    c.pred_total = static_cast<long>(pred.size());

    FrameMap pf = by_frame(pred), gf = by_frame(gt);
    std::set<int> frames;
    for (const auto& [f, _] : pf) frames.insert(f);
    for (const auto& [f, _] : gf) frames.insert(f);

    // CLEAR pass: per-frame matching, FP/FN, and id switches.
    std::map<int, int> last_pred_of_gt;  // gt id -> last matched pred id
    // IDF1 pass accumulator: frames where pred trajectory i overlaps gt
    // trajectory j above threshold.
    std::map<std::pair<int, int>, long> overlap;

    for (int f : frames) {
        const std::vector<MotLine> empty;
        const auto& p = pf.count(f) ? pf[f] : empty;
        const auto& g = gf.count(f) ? gf[f] : empty;
        std::vector<Box> pb, gb;
        for (const auto& l : p) pb.push_back(l.box);
        for (const auto& l : g) gb.push_back(l.box);
        FrameMatch m = match_frame(pb, gb, iou_threshold);
        c.fp += m.fp;
        c.fn += m.fn;
        for (auto [i, j] : m.pairs) {
            int pid = p[i].id, gid = g[j].id;
            auto it = last_pred_of_gt.find(gid);
            if (it != last_pred_of_gt.end() && it->second != pid) ++c.idsw;
            last_pred_of_gt[gid] = pid;
        }
        // IDF1 overlaps consider every above-threshold (pred, gt) pair of a
        // one-to-one per-frame matching; reuse the same matching.
        for (auto [i, j] : m.pairs) ++overlap[{p[i].id, g[j].id}];
    }

    // Global trajectory-level bipartite matching maximizing total overlap.
    std::set<int> pids, gids;
    for (const auto& l : pred) pids.insert(l.id);
    for (const auto& l : gt) gids.insert(l.id);
    std::vector<int> pv(pids.begin(), pids.end()), gv(gids.begin(), gids.end());
    long idtp = 0;
    if (!pv.empty() && !gv.empty()) {
        Mat cost = Mat::Zero(pv.size(), gv.size());
        for (std::size_t i = 0; i < pv.size(); ++i)
            for (std::size_t j = 0; j < gv.size(); ++j) {
                auto it = overlap.find({pv[i], gv[j]});
                if (it != overlap.end()) cost(i, j) = -static_cast<double>(it->second);
            }
        for (auto [i, j] : hungarian(cost)) idtp += static_cast<long>(-cost(i, j));
    }
    c.idtp = idtp;
    c.idfp = c.pred_total - idtp;
    c.idfn = c.gt_total - idtp;
    return c;
}

real_t idf1(const EvalCounts& c) {
    if (c.gt_total == 0) throw DataError("idf1: zero ground-truth boxes");
    long denom = 2 * c.idtp + c.idfp + c.idfn;
    return denom == 0 ? 1.0 : 2.0 * c.idtp / static_cast<real_t>(denom);
}

real_t mota(const EvalCounts& c) {
    if (c.gt_total == 0) throw DataError("mota: zero ground-truth boxes");
    return 1.0 - static_cast<real_t>(c.fn + c.fp + c.idsw) / static_cast<real_t>(c.gt_total);
}

long id_switches(const EvalCounts& c) { return c.idsw; }

EvalReport evaluate_dataset(const std::vector<std::vector<MotLine>>& preds,
                            const std::vector<std::vector<MotLine>>& gts,
                            const std::vector<std::string>& names, double iou_threshold) {
    if (preds.size() != gts.size())
        throw DimensionError("evaluate_dataset: pred/gt sequence counts differ");
    EvalReport r;
    real_t assoc_num = 0;
    long assoc_pairs = 0;
    for (std::size_t s = 0; s < preds.size(); ++s) {
        EvalCounts c = evaluate_sequence(preds[s], gts[s], iou_threshold);
        r.per_sequence.push_back(c);
        r.sequence_names.push_back(s < names.size() ? names[s] : "seq_" + std::to_string(s));
        r.totals.idtp += c.idtp;
        r.totals.idfp += c.idfp;
        r.totals.idfn += c.idfn;
        r.totals.fp += c.fp;
        r.totals.fn += c.fn;
        r.totals.idsw += c.idsw;
        r.totals.gt_total += c.gt_total;
        r.totals.pred_total += c.pred_total;
        // dataset association accuracy = detection-weighted mean
        auto [num, den] = [&]() -> std::pair<real_t, long> {
            real_t aa = association_accuracy(preds[s], gts[s], iou_threshold);
            long pairs = 0;
            std::map<int, int> first;
            for (const auto& l : gts[s])
                if (!first.count(l.id)) first[l.id] = l.frame;
            for (const auto& l : gts[s])
                if (l.frame > first[l.id]) ++pairs;
            return {aa * pairs, pairs};
        }();
        assoc_num += num;
        assoc_pairs += den;
    }
    r.idf1 = idf1(r.totals);
    r.mota = mota(r.totals);
    r.id_switches = r.totals.idsw;
    r.association_accuracy = assoc_pairs == 0 ? 1.0 : assoc_num / assoc_pairs;
    return r;
}

std::string format_report(const EvalReport& r) {
    std::ostringstream out;
    out << "sequences: " << r.per_sequence.size() << "\n";
    out << "IDF1:  " << double_repr(r.idf1) << "\n";
    out << "MOTA:  " << double_repr(r.mota) << "\n";
    out << "IDSW:  " << r.id_switches << "\n";
    out << "AssocAcc: " << double_repr(r.association_accuracy) << "\n";
    out << "FP: " << r.totals.fp << "  FN: " << r.totals.fn << "  GT: " << r.totals.gt_total
        << "\n";
    return out.str();
}

std::string report_csv(const EvalReport& r) {
    std::ostringstream out;
    out << "sequence,idf1,mota,idsw,fp,fn,gt\n";
    for (std::size_t s = 0; s < r.per_sequence.size(); ++s) {
        const EvalCounts& c = r.per_sequence[s];
        out << r.sequence_names[s] << "," << double_repr(idf1(c)) << "," << double_repr(mota(c))
            << "," << c.idsw << "," << c.fp << "," << c.fn << "," << c.gt_total << "\n";
    }
    out << "TOTAL," << double_repr(r.idf1) << "," << double_repr(r.mota) << ","
        << r.id_switches << "," << r.totals.fp << "," << r.totals.fn << ","
        << r.totals.gt_total << "\n";
    return out.str();
}

real_t association_accuracy(const std::vector<MotLine>& pred, const std::vector<MotLine>& gt,
                            double iou_threshold) {
    FrameMap pf = by_frame(pred), gf = by_frame(gt);
    std::map<int, int> first_frame;  // gt id -> first frame
    for (const auto& l : gt) {
        auto it = first_frame.find(l.id);
        if (it == first_frame.end() || l.frame < it->second) first_frame[l.id] = l.frame;
    }
    std::map<int, int> reference;  // gt id -> pred id at first appearance
    long correct = 0, total = 0;
    std::set<int> frames;
    for (const auto& [f, _] : gf) frames.insert(f);
    for (int f : frames) {
        const std::vector<MotLine> empty;
        const auto& p = pf.count(f) ? pf[f] : empty;
        const auto& g = gf[f];
        std::vector<Box> pb, gb;
        for (const auto& l : p) pb.push_back(l.box);
        for (const auto& l : g) gb.push_back(l.box);
        FrameMatch m = match_frame(pb, gb, iou_threshold);
        std::map<int, int> matched;  // gt index -> pred id
        for (auto [i, j] : m.pairs) matched[j] = p[i].id;
        for (std::size_t j = 0; j < g.size(); ++j) {
            int gid = g[j].id;
            if (f == first_frame[gid]) {
                auto it = matched.find(static_cast<int>(j));
                if (it != matched.end()) reference[gid] = it->second;
            } else {
                ++total;
                auto ref = reference.find(gid);
                auto it = matched.find(static_cast<int>(j));
                if (ref != reference.end() && it != matched.end() && it->second == ref->second)
                    ++correct;
            }
        }
    }
    return total == 0 ? 1.0 : static_cast<real_t>(correct) / static_cast<real_t>(total);
}

namespace {

struct BaselineTrack {
    int ext_id = 0;
    int last_seen = -1;
    std::deque<Vec> embeddings;

    Vec mean() const {
        Vec m = Vec::Zero(embeddings.front().size());
        for (const auto& e : embeddings) m += e;
        return m / static_cast<real_t>(embeddings.size());
    }
};

real_t cosine(const Vec& a, const Vec& b) {
    real_t na = a.norm(), nb = b.norm();
    if (na == 0 || nb == 0) return 0.0;
    return a.dot(b) / (na * nb);
}

}  // namespace

std::vector<MotLine> reid_baseline_tracker(const LabeledSequence& seq,
                                           const BaselineConfig& cfg) {
    std::vector<MotLine> out;
    std::vector<BaselineTrack> tracks;
    int next_ext = 1;

    for (int f = 0; f < static_cast<int>(seq.frames.size()); ++f) {
        // drop stale trajectories
        std::vector<BaselineTrack> alive;
        for (auto& tr : tracks)
            if (f - tr.last_seen <= cfg.miss_tolerance) alive.push_back(std::move(tr));
        tracks = std::move(alive);

        std::vector<const Detection*> dets;
        for (const auto& ld : seq.frames[f])
            if (ld.det.confidence > cfg.lambda_det) dets.push_back(&ld.det);
        const int n = static_cast<int>(dets.size());
        const int a = static_cast<int>(tracks.size());

        std::vector<Vec> embs(n);
        for (int i = 0; i < n; ++i)
            embs[i] = Eigen::Map<const Eigen::VectorXf>(dets[i]->feature.data(),
                                                        dets[i]->feature.size())
                          .cast<real_t>();

        std::vector<int> assigned(n, -1);  // track index
        if (n > 0 && a > 0) {
            Mat sim(n, a);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < a; ++j) sim(i, j) = cosine(embs[i], tracks[j].mean());
            if (cfg.use_hungarian) {
                for (auto [i, j] : hungarian(-sim))
                    if (sim(i, j) > cfg.similarity_threshold) assigned[i] = j;
            } else {
                std::vector<char> used(a, 0);
                for (int step = 0; step < std::min(n, a); ++step) {
                    int bi = -1, bj = -1;
                    real_t best = cfg.similarity_threshold;
                    for (int i = 0; i < n; ++i) {
                        if (assigned[i] >= 0) continue;
                        for (int j = 0; j < a; ++j) {
                            if (used[j]) continue;
                            if (sim(i, j) > best) {
                                best = sim(i, j);
                                bi = i;
                                bj = j;
                            }
                        }
                    }
                    if (bi < 0) break;
                    assigned[bi] = bj;
                    used[bj] = 1;
                }
            }
        }

        for (int i = 0; i < n; ++i) {
            int j = assigned[i];
            if (j < 0) {
                if (dets[i]->confidence <= cfg.lambda_new) continue;
                BaselineTrack tr;
                tr.ext_id = next_ext++;
                tracks.push_back(std::move(tr));
                j = static_cast<int>(tracks.size()) - 1;
            }
            BaselineTrack& tr = tracks[j];
            tr.last_seen = f;
            tr.embeddings.push_back(embs[i]);
            while (static_cast<int>(tr.embeddings.size()) > cfg.window_len)
                tr.embeddings.pop_front();
            MotLine l;
            l.frame = f + 1;
            l.id = tr.ext_id;
            l.box = dets[i]->box;
            l.conf = dets[i]->confidence;
            out.push_back(l);
        }
    }
    std::sort(out.begin(), out.end(), [](const MotLine& x, const MotLine& y) {
        return std::tie(x.frame, x.id) < std::tie(y.frame, y.id);
    });
    return out;
}

}  // namespace idtrack
