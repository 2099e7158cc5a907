#include "nsopen/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "nsopen/errors.hpp"

namespace nsopen {

Block make_block(const MapSequence& seq, const HoleSequence& holes, std::size_t start, int T, const Grid& grid,
                 OperatorCache* cache) {
    if (T < 1) throw InputError("block length must be positive");
    if (start + static_cast<std::size_t>(T) > seq.size() || start + static_cast<std::size_t>(T) > holes.size())
        throw InputError("block extends past the sequence");
    OperatorCache local;
    OperatorCache& ops = cache ? *cache : local;
    Block block;
    for (int k = 0; k < T; ++k) block.push_back(ops.get(seq[start + k], holes[start + k], grid));
    return block;
}

Block power_block(const MapSpec& g, int i, const Grid& grid, OperatorCache* cache) {
    if (i < 1) throw InputError("iterate count must be at least 1");
    std::shared_ptr<const UlamOperator> op;
    if (cache) op = cache->get(g, HoleSpec::empty(grid.dimension()), grid);
    else op = std::make_shared<const UlamOperator>(build_closed(g, grid));
    return Block(static_cast<std::size_t>(i), op);
}

namespace {

using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

RowSparse aggregation(const PartitionSpec& Q) {
    std::vector<Eigen::Triplet<double>> t;
    const auto& labels = Q.labels();
    t.reserve(labels.size());
    for (std::size_t c = 0; c < labels.size(); ++c) t.emplace_back(labels[c], static_cast<int>(c), 1.0);
    RowSparse R(static_cast<Eigen::Index>(Q.size()), static_cast<Eigen::Index>(labels.size()));
    R.setFromTriplets(t.begin(), t.end());
    return R;
}

// Column a holds the image of the indicator of element a.
class ForwardImages {
public:
    explicit ForwardImages(const PartitionSpec& Q) : Q_(Q), R_(aggregation(Q)) {
        X_.setZero(static_cast<Eigen::Index>(Q.labels().size()), static_cast<Eigen::Index>(Q.size()));
        for (std::size_t c = 0; c < Q.labels().size(); ++c) X_(static_cast<Eigen::Index>(c), Q.labels()[c]) = 1.0;
    }
    void apply(const UlamOperator& op) {
        const auto& M = op.matrix();
        const Eigen::Index w = X_.cols();
        Y_.setZero(X_.rows(), w);
        for (Eigen::Index j = 0; j < M.outerSize(); ++j) {
            const double* src = X_.data() + j * w;
            for (UlamOperator::Matrix::InnerIterator it(M, j); it; ++it) {
                double* dst = Y_.data() + it.row() * w;
                const double v = it.value();
                for (Eigen::Index k = 0; k < w; ++k) dst[k] += v * src[k];
            }
        }
        X_.swap(Y_);
    }
    /// Entry (b, a) is the mass of element a carried into element b.
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& sums() {
        const Eigen::Index w = X_.cols();
        S_.setZero(w, w);
        const auto& labels = Q_.labels();
        for (std::size_t c = 0; c < labels.size(); ++c) {
            const double* src = X_.data() + static_cast<Eigen::Index>(c) * w;
            const Eigen::Index b = labels[c];
            for (Eigen::Index a = 0; a < w; ++a) S_(b, a) += src[a];
        }
        S_ *= Q_.grid().cell_measure();
        return S_;
    }

private:
    const PartitionSpec& Q_;
    RowSparse R_;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> X_, Y_;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> S_;
};

template <typename Mat>
MixingRatios ratios_transposed(const Mat& S, const PartitionSpec& Q) {
    MixingRatios r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    const double cm = Q.grid().cell_measure();
    std::vector<double> len(Q.size());
    for (std::size_t k = 0; k < len.size(); ++k) {
        len[k] = Q.element(k).size() * cm;
        if (!(len[k] > 0)) throw InputError("partition element of zero measure");
    }
    for (Eigen::Index b = 0; b < S.rows(); ++b) {
        const double lb = len[static_cast<std::size_t>(b)];
        for (Eigen::Index a = 0; a < S.cols(); ++a) {
            double ratio = S(b, a) / (len[static_cast<std::size_t>(a)] * lb);
            r.min_ratio = std::min(r.min_ratio, ratio);
            r.max_ratio = std::max(r.max_ratio, ratio);
        }
    }
    return r;
}

} // namespace

Eigen::MatrixXd transition_masses(const Block& block, const PartitionSpec& Q) {
    const Grid& grid = Q.grid();
    for (const auto& op : block)
        if (op->grid() != grid) throw InputError("block and partition grids differ");
    ForwardImages images(Q);
    for (const auto& op : block) images.apply(*op);
    return Eigen::MatrixXd(images.sums().transpose());
}

MixingRatios ratios_from_masses(const Eigen::MatrixXd& masses, const PartitionSpec& Q) {
    return ratios_transposed(masses.transpose(), Q);
}

MixingRatios mixing_ratios(const Block& block, const PartitionSpec& Q) {
    for (const auto& op : block)
        if (op->grid() != Q.grid()) throw InputError("block and partition grids differ");
    ForwardImages images(Q);
    for (const auto& op : block) images.apply(*op);
    return ratios_transposed(images.sums(), Q);
}

MixingRatios mixing_ratios(const MapSpec& g, const PartitionSpec& Q, int i, OperatorCache* cache) {
    return mixing_ratios(power_block(g, i, Q.grid(), cache), Q);
}

nlohmann::json MixingCertificate::to_json() const {
    return {{"zeta1", zeta1},
            {"zeta2", zeta2},
            {"E", E},
            {"ratio_min", ratio_min},
            {"ratio_max", ratio_max},
            {"i_checked", {E, i_checked_max}},
            {"partition_elements", partition.size()},
            {"partition_measure_diameter", diam_lambda(partition)},
            {"partition_metric_diameter", metric_diam(partition)}};
}

std::optional<MixingCertificate> find_mixing_time(const MapSpec& g, const PartitionSpec& Q, double zeta1, double zeta2,
                                                  int i_max, OperatorCache* cache) {
    if (!(zeta1 > 0.0 && zeta1 < 1.0)) throw InputError("zeta1 must lie in (0,1)");
    if (!(zeta2 > 1.0)) throw InputError("zeta2 must exceed 1");
    if (i_max < 1) throw InputError("i_max must be at least 1");
    const Grid& grid = Q.grid();
    auto op = cache ? cache->get(g, HoleSpec::empty(grid.dimension()), grid)
                    : std::make_shared<const UlamOperator>(build_closed(g, grid));
    ForwardImages images(Q);
    std::vector<MixingRatios> per_step;
    for (int i = 1; i <= i_max; ++i) {
        images.apply(*op);
        per_step.push_back(ratios_transposed(images.sums(), Q));
    }
    int E = -1;
    for (int i = i_max; i >= 1; --i) {
        if (!per_step[i - 1].within(zeta1, zeta2)) break;
        E = i;
    }
    if (E < 0) return std::nullopt;
    return MixingCertificate{zeta1, zeta2, Q, E, per_step[E - 1].min_ratio, per_step[E - 1].max_ratio, i_max};
}

nlohmann::json StabilityResult::to_json() const {
    nlohmann::json v = nlohmann::json::array();
    for (const auto& x : violations) v.push_back({{"sample", x.sample}, {"min_ratio", x.min_ratio}, {"max_ratio", x.max_ratio}});
    return {{"ok", ok}, {"samples", samples}, {"seed", seed}, {"worst_min", worst_min}, {"worst_max", worst_max},
            {"violations", v}};
}

HoleSpec sample_hole(int dimension, double epsilon, std::mt19937_64& rng) {
    if (epsilon < 0) throw ConfigError("hole measure cap must be nonnegative");
    if (epsilon == 0) return HoleSpec::empty(dimension);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double size = epsilon * (1.0 - unit(rng));
    if (dimension == 1) return HoleSpec(1, {HoleArc{unit(rng), std::min(size, 1.0)}});
    double side = std::min(1.0, std::sqrt(size));
    return HoleSpec(2, {HoleRect{unit(rng), unit(rng), side, side}});
}

StabilityResult stability_check(const MapSpec& g, const PartitionSpec& Q, double zeta1, double zeta2, int S,
                                double delta, double epsilon, std::size_t samples, std::uint64_t seed) {
    if (S < 1) throw InputError("block length must be positive");
    if (delta < 0 || epsilon < 0) throw ConfigError("perturbation and hole caps must be nonnegative");
    const Grid& grid = Q.grid();
    StabilityResult result;
    result.samples = samples;
    result.seed = seed;
    result.worst_min = std::numeric_limits<double>::infinity();
    result.worst_max = -std::numeric_limits<double>::infinity();
    OperatorCache cache;
    for (std::size_t k = 0; k < samples; ++k) {
        std::seed_seq sseq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                           static_cast<std::uint32_t>(k), 0x5ab1u};
        std::mt19937_64 rng(sseq);
        Block block;
        for (int s = 0; s < S; ++s) {
            MapSpec f = sample_perturbation(g, delta, rng);
            HoleSpec h = sample_hole(grid.dimension(), epsilon, rng);
            if (delta == 0 && epsilon == 0) block.push_back(cache.get(f, h, grid));
            else block.push_back(std::make_shared<const UlamOperator>(build_open(f, h, grid)));
        }
        MixingRatios r = mixing_ratios(block, Q);
        result.worst_min = std::min(result.worst_min, r.min_ratio);
        result.worst_max = std::max(result.worst_max, r.max_ratio);
        if (!r.within(zeta1, zeta2)) result.violations.push_back({k, r.min_ratio, r.max_ratio});
    }
    result.ok = result.violations.empty();
    return result;
}

} // namespace nsopen
