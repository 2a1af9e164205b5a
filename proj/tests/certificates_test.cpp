/*
 Copyright 2026 The cbfqp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "cbfqp/certificates.hpp"
#include "test_util.hpp"

namespace cbfqp {
namespace {

using testing::vec;

QuadraticCertificate unit_sphere() { return QuadraticCertificate::cbf(Matrix::Identity(2, 2), Vector::Zero(2), -1.0); }

CertificateSet two_barriers() {
    return CertificateSet(std::nullopt,
                          {BarrierTerm{QuadraticCertificate::cbf(Matrix::Identity(2, 2), vec({0, 0}), -1.0),
                                       LinearClassK(1.0)},
                           BarrierTerm{QuadraticCertificate::cbf(Matrix::Identity(2, 2), vec({3, 0}), -1.0),
                                       LinearClassK(2.0)}});
}

TEST(Certificates, Values) {
    EXPECT_EQ(eval_certificate(unit_sphere(), vec({1, 0})), 0.0);
    EXPECT_EQ(eval_certificate(unit_sphere(), vec({2, 0})), 3.0);
    auto v = QuadraticCertificate::clf(0.5 * Matrix::Identity(2, 2), Vector::Zero(2));
    EXPECT_EQ(eval_certificate(v, vec({3, 0})), 4.5);
}

TEST(Certificates, ClfValidation) {
    Matrix indefinite(2, 2);
    indefinite << 1, 0, 0, -1;
    EXPECT_THROW(QuadraticCertificate::clf(indefinite, Vector::Zero(2)), InvalidParameter);
    EXPECT_THROW(QuadraticCertificate(CertificateKind::Clf, Matrix::Identity(2, 2), Vector::Zero(2), 1.0),
                 InvalidParameter);
    Matrix asym(2, 2);
    asym << 1, 2, 0, 1;
    EXPECT_THROW(QuadraticCertificate::cbf(asym, Vector::Zero(2), -1.0), InvalidParameter);
    // Sign-indefinite CBF shapes are allowed.
    EXPECT_NO_THROW(QuadraticCertificate::cbf(indefinite, Vector::Zero(2), -1.0));
}

TEST(Certificates, StackedGradients) {
    CertificateSet one(std::nullopt, {BarrierTerm{unit_sphere(), LinearClassK(1.0)}});
    std::vector<int> a{0};
    EXPECT_EQ(stacked_gradients_U(one, a, vec({1, 0})), vec({2, 0}));

    auto set = two_barriers();
    Vector x = vec({1.5, 0.7});
    std::vector<int> fwd{0, 1};
    std::vector<int> rev{1, 0};
    Matrix u = stacked_gradients_U(set, fwd, x);
    Matrix u_rev = stacked_gradients_U(set, rev, x);
    EXPECT_EQ(u.col(0), u_rev.col(1));
    EXPECT_EQ(u.col(1), u_rev.col(0));
    EXPECT_EQ(u.col(0), set.cbfs()[0].certificate.gradient(x));
    EXPECT_EQ(u.col(1), set.cbfs()[1].certificate.gradient(x));
    EXPECT_EQ(stacked_gradients_U(set, x), u);
}

TEST(Certificates, StackedGradientsRejectBadIndices) {
    auto set = two_barriers();
    std::vector<int> empty;
    std::vector<int> out_of_range{2};
    std::vector<int> dup{1, 1};
    EXPECT_THROW((void)stacked_gradients_U(set, empty, vec({0, 0})), ContractViolation);
    EXPECT_THROW((void)stacked_gradients_U(set, out_of_range, vec({0, 0})), ContractViolation);
    EXPECT_THROW((void)stacked_gradients_U(set, dup, vec({0, 0})), ContractViolation);
}

TEST(Certificates, AlphaVector) {
    auto set = two_barriers();
    std::vector<int> first{0};
    EXPECT_EQ(alpha_vector(set, first, vec({1, 0}))(0), 0.0);
    EXPECT_EQ(alpha_vector(CertificateSet(std::nullopt, {BarrierTerm{QuadraticCertificate::cbf(
                                                                         Matrix::Identity(1, 1), vec({0}), -0.5),
                                                                     LinearClassK(1.0)}}),
                           first, vec({1}))(0),
              0.5);

    // h = (0.5, 3) with gains (1, 2).
    CertificateSet pair(std::nullopt,
                        {BarrierTerm{QuadraticCertificate::cbf(Matrix::Identity(1, 1), vec({0}), -0.5), LinearClassK(1.0)},
                         BarrierTerm{QuadraticCertificate::cbf(Matrix::Identity(1, 1), vec({0}), 2.0), LinearClassK(2.0)}});
    std::vector<int> both{0, 1};
    EXPECT_EQ(alpha_vector(pair, both, vec({1})), vec({0.5, 6}));
    EXPECT_EQ(alpha_prime_vector(pair, both, vec({1})), vec({1, 2}));
}

TEST(Certificates, ClassK) {
    LinearClassK k(2.5);
    EXPECT_EQ(k.value(0.0), 0.0);
    double prev = k.value(-5.0);
    for (int i = -49; i <= 50; ++i) {
        double s = 0.1 * i;
        EXPECT_GT(k.value(s), prev);
        EXPECT_GT(k.derivative(s), 0.0);
        prev = k.value(s);
    }
    EXPECT_THROW(LinearClassK(0.0), InvalidParameter);
    EXPECT_THROW(LinearClassK(-1.0), InvalidParameter);
}

TEST(Certificates, SafetyFilterSetHasZeroClf) {
    auto set = two_barriers();
    EXPECT_FALSE(set.has_clf());
    EXPECT_EQ(set.clf_value(vec({4, 4})), 0.0);
    EXPECT_TRUE(set.clf_gradient(vec({4, 4})).isZero(0.0));
    EXPECT_TRUE(set.clf_hessian().isZero(0.0));
}

TEST(Certificates, DerivativesMatchFiniteDifferences) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    Matrix s = Matrix::NullaryExpr(3, 3, [&] { return nd(rng); });
    s = 0.5 * (s + s.transpose()).eval();
    auto c = QuadraticCertificate::cbf(s, vec({0.5, -1, 2}), -0.3);
    const double h = 1e-5;
    for (int k = 0; k < 100; ++k) {
        Vector x = Vector::NullaryExpr(3, [&] { return 3.0 * nd(rng); });
        Vector grad = c.gradient(x);
        Vector fd(3);
        Matrix hess_fd(3, 3);
        for (int i = 0; i < 3; ++i) {
            Vector e = Vector::Unit(3, i) * h;
            fd(i) = (c.value(x + e) - c.value(x - e)) / (2 * h);
            hess_fd.col(i) = (c.gradient(x + e) - c.gradient(x - e)) / (2 * h);
        }
        EXPECT_LE((fd - grad).norm(), 1e-7 * std::max(1.0, grad.norm()));
        EXPECT_LE((hess_fd - c.hessian()).cwiseAbs().maxCoeff(), 1e-4);
    }
}

}  // namespace
}  // namespace cbfqp
