#include <gtest/gtest.h>

#include "vitreoforge/codec.hpp"
#include "vitreoforge/phantom.hpp"

using namespace vitreoforge;

namespace {

ImageTensor phantom_image(std::uint64_t seed, std::size_t size = 16) {
  PhantomSpec spec;
  spec.height = spec.width = size;
  spec.layer_boundaries = {4, 8, 12};
  spec.layer_reflectivities = {0.1, 0.6, 0.3, 0.8};
  spec.boundary_jitter = 1.0;
  spec.seed = seed;
  return generate_clean(spec);
}

}  // namespace

TEST(IdentityCodecTest, ExactRoundTrip) {
  const auto codec = identity_codec();
  auto img = phantom_image(1).cast<float>().cast<double>();
  EXPECT_TRUE(codec->decode(codec->encode(img)) == img);
  EXPECT_EQ(codec->latent_shape(16, 24), (LatentShape{1, 16, 24}));
  EXPECT_EQ(codec->tolerance(), 0.0);
  EXPECT_THROW(codec->decode(Tensor<float>(2, 4, 4)), InvalidInput);
}

TEST(TinyAutoencoderTest, OverfitsSingleImage) {
  const auto img = phantom_image(3);
  const auto ae = tiny_autoencoder_train({img});
  EXPECT_LT(ae->reconstruction_mse(img), 1e-3);
  const auto z = ae->encode(img);
  const auto shape = ae->latent_shape(16, 16);
  EXPECT_EQ(z.channels(), shape.channels);
  EXPECT_EQ(z.height(), shape.height);
  EXPECT_EQ(z.width(), shape.width);
  EXPECT_TRUE(ae->decode(z).same_shape(img));
}

TEST(TinyAutoencoderTest, Errors) {
  EXPECT_THROW(tiny_autoencoder_train({}), InvalidInput);
  EXPECT_THROW(tiny_autoencoder_train({ImageTensor(5, 4)}), InvalidInput);
  AutoencoderConfig cfg;
  cfg.steps = 1;
  cfg.mse_threshold = 1e-12;
  EXPECT_THROW(tiny_autoencoder_train({phantom_image(2)}, cfg), Diverged);
}
