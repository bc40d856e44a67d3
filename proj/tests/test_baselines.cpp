#include <gtest/gtest.h>

#include "cellsim/baselines.hpp"
#include "cellsim/signaling.hpp"

using namespace cellsim;
using namespace cellsim::baselines;

namespace {

ValueTable two_by_two()
{
    ValueTable v(2, 2);
    v(0, 0) = 10.0;
    v(0, 1) = 3.0;
    v(1, 0) = 8.0;
    v(1, 1) = 5.0;
    return v;
}

} // namespace

TEST(MaxSinr, StrongestUeKeepsContestedCell)
{
    const auto spec = LoadSpec::uniform({1, 1}, 2, 1);
    EXPECT_EQ(max_sinr_association(two_by_two(), spec), (AssociationVector{0, kUnassociated}));
    const auto roomy = LoadSpec::uniform({2, 1}, 2, 1);
    EXPECT_EQ(max_sinr_association(two_by_two(), roomy), (AssociationVector{0, 0}));
}

TEST(MaxSinr, TiesGoToLowestIndex)
{
    ValueTable v(1, 2, 4.0);
    EXPECT_EQ(max_sinr_association(v, LoadSpec::uniform({1, 1}, 1, 1)), (AssociationVector{0}));
}

TEST(MaxSinr, ShapeChecked)
{
    EXPECT_THROW(max_sinr_association(ValueTable(1, 2), LoadSpec::uniform({1}, 1, 1)), InvalidInput);
}

TEST(WcsRates, FindsTheBetterPairing)
{
    const auto spec = LoadSpec::uniform({1, 1}, 2, 1);
    const auto res = wcs_rate_association(two_by_two(), spec, {1, 0});
    EXPECT_EQ(res.assoc, (AssociationVector{0, 1}));
    EXPECT_DOUBLE_EQ(res.objective, 15.0);
}

TEST(Signaling, PerStepCosts)
{
    const BitWidths x;
    EXPECT_EQ(signaling_step_cost(SignalingKind::clb, 30, 6, x), 960u);
    EXPECT_EQ(signaling_step_cost(SignalingKind::dlb, 30, 6, x), 1080u);
    EXPECT_EQ(signaling_step_cost(SignalingKind::amf, 30, 6, x), 480u);
    EXPECT_EQ(signaling_step_cost(SignalingKind::max_sinr, 30, 6, x), 2880u);
    EXPECT_EQ(signaling_step_cost(SignalingKind::wcs, 2, 3, x, 64, 4), 2u * 3u * 64u * 4u * 16u);
    BitWidths bad;
    bad.rate = 0;
    EXPECT_THROW(signaling_step_cost(SignalingKind::clb, 1, 1, bad), InvalidInput);
    EXPECT_THROW(bad.validate(), ConfigError);
}
