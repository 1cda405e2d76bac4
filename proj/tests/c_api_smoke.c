/*
 * Copyright 2026 The extattn Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* Exercises the public header from a C translation unit. */

#include <stdio.h>

#include "extattn/extattn.h"

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: %s failed: %s\n", __FILE__, __LINE__, \
              #cond, extattn_last_error());                       \
      return 1;                                                   \
    }                                                             \
  } while (0)

int main(void) {
  extattn_config config;
  extattn_config_init(&config);
  config.mechanism = EXTATTN_MECH_MEA;
  config.n = 4;
  config.d_in = 4;
  config.d = 4;
  config.s = 3;
  config.heads = 2;
  EXPECT(extattn_config_validate(&config) == EXTATTN_OK);

  uint64_t params = 0, macs = 0;
  EXPECT(extattn_count(&config, &params, &macs) == EXTATTN_OK);
  EXPECT(params == 2 * 4 * 4 + 2 * 3 * 2);

  extattn_model* model = NULL;
  EXPECT(extattn_model_create(&config, 1, &model) == EXTATTN_OK);
  const uint64_t shape[2] = {4, 4};
  extattn_tensor* input = NULL;
  EXPECT(extattn_tensor_random(shape, 2, 2, &input) == EXTATTN_OK);
  extattn_tensor* attn = NULL;
  EXPECT(extattn_model_forward(model, input, NULL, &attn) == EXTATTN_OK);
  EXPECT(extattn_tensor_rank(attn) == 4);
  EXPECT(extattn_tensor_extent(attn, 1) == 2);

  config.d = 5;
  EXPECT(extattn_config_validate(&config) == EXTATTN_ERR_CONFIG);

  extattn_tensor_destroy(attn);
  extattn_tensor_destroy(input);
  extattn_model_destroy(model);
  printf("c api smoke ok\n");
  return 0;
}
