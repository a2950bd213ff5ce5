#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "gmoe/json_io.hpp"
#include "gmoe/model.hpp"
#include "gmoe/presets.hpp"
#include "gmoe/sampler.hpp"

using namespace gmoe;

namespace {

Component random_component(std::mt19937_64& rng, Eigen::Index d) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit(0.05, 1.0);
    Component comp;
    comp.c = Vector(d);
    comp.a = Vector(d);
    Matrix root(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        comp.c(i) = normal(rng);
        comp.a(i) = normal(rng);
        for (Eigen::Index j = 0; j < d; ++j) root(i, j) = 0.5 * normal(rng);
    }
    comp.gamma = root * root.transpose() + unit(rng) * Matrix::Identity(d, d);
    comp.gamma = 0.5 * (comp.gamma + comp.gamma.transpose()).eval();
    comp.b = normal(rng);
    comp.nu = unit(rng);
    return comp;
}

// Direct evaluation of a 2-d Gaussian density from det and explicit inverse.
double direct_log_pdf_2d(double x0, double x1, double m0, double m1, double s00, double s01, double s11) {
    const double det = s00 * s11 - s01 * s01;
    const double i00 = s11 / det, i01 = -s01 / det, i11 = s00 / det;
    const double d0 = x0 - m0, d1 = x1 - m1;
    const double q = d0 * d0 * i00 + 2 * d0 * d1 * i01 + d1 * d1 * i11;
    return -std::log(2 * M_PI) - 0.5 * std::log(det) - 0.5 * q;
}

}  // namespace

TEST(GaussianLogPdf, StandardNormalAtMode) {
    EXPECT_NEAR(gaussian_log_pdf(Vector::Zero(1), Vector::Zero(1), Matrix::Identity(1, 1)), -0.9189385332046727,
                1e-15);
}

TEST(GaussianLogPdf, IdentityCovarianceAtMean) {
    for (int d = 1; d <= 4; ++d) {
        const Vector m = Vector::LinSpaced(d, -1.0, 2.0);
        EXPECT_NEAR(gaussian_log_pdf(m, m, Matrix::Identity(d, d)), -0.5 * d * std::log(2 * M_PI), 1e-13);
    }
}

TEST(GaussianLogPdf, MatchesDirectTwoByTwoFormula) {
    Vector x(2), m(2);
    x << 1, 1;
    m << 0, 0;
    Matrix cov = 2.0 * Matrix::Identity(2, 2);
    EXPECT_NEAR(gaussian_log_pdf(x, m, cov), direct_log_pdf_2d(1, 1, 0, 0, 2, 0, 2), 1e-14);

    cov << 1.3, -0.4, -0.4, 0.7;
    x << 0.3, -1.2;
    m << -0.5, 0.25;
    EXPECT_NEAR(gaussian_log_pdf(x, m, cov), direct_log_pdf_2d(0.3, -1.2, -0.5, 0.25, 1.3, -0.4, 0.7), 1e-13);
}

TEST(GaussianLogPdf, RejectsIndefiniteCovarianceNamingEigenvalue) {
    Matrix cov(2, 2);
    cov << 1, 2, 2, 1;  // eigenvalues 3 and -1
    try {
        gaussian_log_pdf(Vector::Zero(2), Vector::Zero(2), cov);
        FAIL() << "expected DomainError";
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("smallest eigenvalue -0.99999"), std::string::npos) << e.what();
    }
    EXPECT_THROW(gaussian_log_pdf(Vector::Zero(2), Vector::Zero(1), Matrix::Identity(2, 2)), DomainError);
}

TEST(Component, ValidationCatchesBrokenInvariants) {
    Component comp = scalar_component(0, 1, 0, 0, 1);
    EXPECT_NO_THROW(comp.validate());
    comp.nu = 1e-9;
    EXPECT_THROW(comp.validate(), DomainError);
    comp = scalar_component(0, 1e-9, 0, 0, 1);
    EXPECT_THROW(comp.validate(), DomainError);

    Component asym;
    asym.c = Vector::Zero(2);
    asym.a = Vector::Zero(2);
    asym.gamma = Matrix::Identity(2, 2);
    asym.gamma(0, 1) = 1e-6;
    EXPECT_THROW(asym.validate(), DomainError);
}

TEST(MixingMeasure, Invariants) {
    const auto c = scalar_component(0, 1, 0, 0, 1);
    EXPECT_THROW(MixingMeasure({}, {}), DomainError);
    EXPECT_THROW(MixingMeasure({0.5, 0.4}, {c, c}), DomainError);
    EXPECT_THROW(MixingMeasure({1.0}, {c, c}), DomainError);
    EXPECT_THROW(MixingMeasure({1.5, -0.5}, {c, c}), DomainError);
    Floors f;
    f.beta = 0.3;
    EXPECT_THROW(MixingMeasure({0.8, 0.2}, {c, c}, f, true), DomainError);
    EXPECT_NO_THROW(MixingMeasure({0.8, 0.2}, {c, c}, f, false));
    EXPECT_NO_THROW(MixingMeasure({0.6, 0.4}, {c, c}, f, true));
}

TEST(LogJointDensity, ProductOfStandardNormals) {
    const MixingMeasure g({1.0}, {scalar_component(0, 1, 0, 0, 1)});
    EXPECT_NEAR(log_joint_density(g, Vector::Zero(1), 0.0), -1.8378770664093453, 1e-15);
    EXPECT_THROW(log_joint_density(g, Vector::Zero(2), 0.0), DomainError);
}

TEST(LogJointDensity, ModelOneMatchesExtendedPrecisionTermSum) {
    const auto g = model_preset(ModelId::Model1);
    for (double x : {0.0, -0.3, 0.45}) {
        for (double y : {0.0, 0.2, -0.5}) {
            long double total = 0.0L;
            for (std::size_t j = 0; j < g.size(); ++j) {
                const auto& comp = g.component(j);
                const long double gm = comp.gamma(0, 0);
                const long double mean_y = static_cast<long double>(comp.a(0)) * x + comp.b;
                const long double gate =
                    std::exp(-0.5L * (x - comp.c(0)) * (x - comp.c(0)) / gm) / std::sqrt(2.0L * M_PIl * gm);
                const long double expert = std::exp(-0.5L * (y - mean_y) * (y - mean_y) / comp.nu) /
                                           std::sqrt(2.0L * M_PIl * comp.nu);
                total += static_cast<long double>(g.weight(j)) * gate * expert;
            }
            const double expected = static_cast<double>(std::log(total));
            EXPECT_NEAR(log_joint_density(g, Vector::Constant(1, x), y), expected, 1e-12 * std::abs(expected) + 1e-13);
        }
    }
}

TEST(LogJointDensity, PermutationInvariant) {
    for (auto id : {ModelId::Model1, ModelId::Model2, ModelId::Model3, ModelId::Model4}) {
        const auto g = model_preset(id);
        const auto gp = g.permuted({2, 0, 1});
        std::mt19937_64 rng(7);
        std::normal_distribution<double> normal(0.0, 0.5);
        for (int t = 0; t < 50; ++t) {
            Vector x(static_cast<Eigen::Index>(g.dim()));
            for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = normal(rng);
            const double y = normal(rng);
            EXPECT_NEAR(log_joint_density(g, x, y), log_joint_density(gp, x, y), 1e-12);
        }
    }
}

TEST(LogJointDensity, IntegratesToOneForScalarPresets) {
    for (auto id : {ModelId::Model1, ModelId::Model2}) {
        const PreparedMeasure g(model_preset(id));
        const double h = 0.01;
        double total = 0.0;
        Vector x(1);
        for (int i = 0; i < 2000; ++i) {
            x(0) = -10.0 + (i + 0.5) * h;
            for (int j = 0; j < 2000; ++j) total += std::exp(g.log_density(x, -10.0 + (j + 0.5) * h));
        }
        EXPECT_NEAR(total * h * h, 1.0, 1e-3) << to_string(id);
    }
}

TEST(JointGaussian, DecoupledCase) {
    const auto jg = to_joint_gaussian(scalar_component(0, 1, 0, 0, 1));
    EXPECT_EQ(jg.psi, Vector::Zero(2));
    EXPECT_EQ(jg.sigma, Matrix::Identity(2, 2));
    const auto back = from_joint_gaussian(jg);
    EXPECT_EQ(back.component, scalar_component(0, 1, 0, 0, 1));
    EXPECT_FALSE(back.nu_clipped);
}

TEST(JointGaussian, ModelOneSecondAtomBlocks) {
    const auto comp = model_preset(ModelId::Model1).component(1);
    const auto jg = to_joint_gaussian(comp);
    EXPECT_NEAR(jg.psi(0), 0.1, 1e-15);
    EXPECT_NEAR(jg.psi(1), -0.401, 1e-15);
    EXPECT_NEAR(jg.sigma(0, 0), 0.02, 1e-15);
    EXPECT_NEAR(jg.sigma(0, 1), -0.0142, 1e-15);
    EXPECT_NEAR(jg.sigma(1, 0), -0.0142, 1e-15);
    EXPECT_NEAR(jg.sigma(1, 1), 0.040082, 1e-15);

    const auto back = from_joint_gaussian(jg).component;
    EXPECT_NEAR(back.c(0), 0.1, 1e-12);
    EXPECT_NEAR(back.gamma(0, 0), 0.02, 1e-12);
    EXPECT_NEAR(back.a(0), -0.71, 1e-12);
    EXPECT_NEAR(back.b, -0.33, 1e-12);
    EXPECT_NEAR(back.nu, 0.03, 1e-12);
}

TEST(JointGaussian, BlocksMatchSampleMomentsOfDraws) {
    const auto comp = model_preset(ModelId::Model1).component(1);
    const auto jg = to_joint_gaussian(comp);
    const auto data = sample(MixingMeasure({1.0}, {comp}), 1000000, 99);
    const double mx = data.x.col(0).mean(), my = data.y.mean();
    const Vector dx = data.x.col(0).array() - mx;
    const Vector dy = data.y.array() - my;
    const double n = static_cast<double>(data.size());
    // 5 standard errors of each moment
    EXPECT_NEAR(mx, jg.psi(0), 5 * std::sqrt(jg.sigma(0, 0) / n));
    EXPECT_NEAR(my, jg.psi(1), 5 * std::sqrt(jg.sigma(1, 1) / n));
    EXPECT_NEAR(dx.squaredNorm() / n, jg.sigma(0, 0), 5 * jg.sigma(0, 0) * std::sqrt(2 / n));
    EXPECT_NEAR(dy.squaredNorm() / n, jg.sigma(1, 1), 5 * jg.sigma(1, 1) * std::sqrt(2 / n));
    const double sxy_se = std::sqrt((jg.sigma(0, 0) * jg.sigma(1, 1) + jg.sigma(0, 1) * jg.sigma(0, 1)) / n);
    EXPECT_NEAR(dx.dot(dy) / n, jg.sigma(0, 1), 5 * sxy_se);
}

TEST(JointGaussian, IndependenceCase) {
    JointGaussian jg;
    jg.psi = Vector(3);
    jg.psi << 0.5, -1.0, 2.5;
    jg.sigma = Matrix::Zero(3, 3);
    jg.sigma.topLeftCorner(2, 2) << 2.0, 0.3, 0.3, 1.0;
    jg.sigma(2, 2) = 0.7;
    const auto comp = from_joint_gaussian(jg).component;
    EXPECT_EQ(comp.a, Vector::Zero(2));
    EXPECT_DOUBLE_EQ(comp.b, 2.5);
    EXPECT_DOUBLE_EQ(comp.nu, 0.7);
}

TEST(JointGaussian, SchurComplementBelowFloorIsClippedAndFlagged) {
    JointGaussian jg;
    jg.psi = Vector::Zero(2);
    jg.sigma = Matrix::Ones(2, 2);  // y is an exact linear function of x
    const auto out = from_joint_gaussian(jg);
    EXPECT_TRUE(out.nu_clipped);
    EXPECT_DOUBLE_EQ(out.component.nu, Floors{}.nu);
    EXPECT_NEAR(out.component.a(0), 1.0, 1e-15);
}

TEST(JointGaussian, RoundTripOnRandomComponents) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 300; ++t) {
        const auto d = 1 + t % 3;
        const auto comp = random_component(rng, d);
        const auto jg = to_joint_gaussian(comp);
        EXPECT_NO_THROW(jg.validate());
        const auto back = from_joint_gaussian(jg).component;
        EXPECT_LT((back.c - comp.c).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((back.gamma - comp.gamma).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((back.a - comp.a).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_NEAR(back.b, comp.b, 1e-12);
        EXPECT_NEAR(back.nu, comp.nu, 1e-12);
        const auto again = to_joint_gaussian(back);
        EXPECT_LT((again.sigma - jg.sigma).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT((again.psi - jg.psi).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(JointGaussian, MixtureDensityEqualsJointGaussianMixture) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 10; ++trial) {
        const auto d = 1 + trial % 2;
        std::vector<Component> comps;
        for (int j = 0; j < 3; ++j) comps.push_back(random_component(rng, d));
        const MixingMeasure g({0.2, 0.5, 0.3}, comps);
        for (int p = 0; p < 10; ++p) {
            Vector x(d);
            for (Eigen::Index i = 0; i < d; ++i) x(i) = normal(rng);
            const double y = normal(rng);
            Vector z(d + 1);
            z.head(d) = x;
            z(d) = y;
            std::vector<double> terms;
            for (std::size_t j = 0; j < g.size(); ++j) {
                const auto jg = to_joint_gaussian(g.component(j));
                terms.push_back(std::log(g.weight(j)) + gaussian_log_pdf(z, jg.psi, jg.sigma));
            }
            const double via_joint = log_sum_exp(terms);
            const double direct = log_joint_density(g, x, y);
            EXPECT_LT(std::abs(direct - via_joint), 1e-10 * std::abs(via_joint)) << direct << " " << via_joint;
        }
    }
}

TEST(MeasureJson, RoundTripIsBitExactAndOrdered) {
    std::mt19937_64 rng(5);
    for (auto id : {ModelId::Model1, ModelId::Model3}) {
        const auto g = model_preset(id);
        const auto text = measure_to_string(g);
        EXPECT_EQ(measure_from_string(text), g);
        const auto pos_weight = text.find("\"weight\"");
        const auto pos_c = text.find("\"c\"");
        const auto pos_gamma = text.find("\"gamma\"");
        const auto pos_nu = text.find("\"nu\"");
        EXPECT_LT(text.find("\"dim\""), text.find("\"atoms\""));
        EXPECT_LT(pos_weight, pos_c);
        EXPECT_LT(pos_c, pos_gamma);
        EXPECT_LT(pos_gamma, pos_nu);
        EXPECT_NE(text.find("0.29999999999999999"), std::string::npos);
    }
    std::vector<Component> comps{random_component(rng, 2), random_component(rng, 2)};
    const MixingMeasure g({1.0 / 3.0, 2.0 / 3.0}, comps);
    EXPECT_EQ(measure_from_string(measure_to_string(g)), g);
    EXPECT_THROW(measure_from_string("{\"dim\": 1}"), DomainError);
    EXPECT_THROW(measure_from_string("not json"), DomainError);
}
