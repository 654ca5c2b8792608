/* Race payoff at one profile through the C API.
 *
 *   cargo build --release -p qwgame-ffi
 *   cc crates/ffi/examples/race.c -Icrates/ffi/include \
 *      target/release/libqwgame_ffi.a -lpthread -ldl -lm -o race
 */
#include <stdio.h>

#include "qwgame.h"

int main(void) {
  QwgConfig *cfg = NULL;
  if (qwg_config_new(15, QWG_BOUNDARY_PERIODIC, 20, &cfg) != QWG_STATUS_OK) {
    fprintf(stderr, "config: %s\n", qwg_last_error());
    return 1;
  }
  qwg_config_set_interaction(cfg, QWG_INTERACTION_COLLISION_PHASE, 3.141592653589793, 0.0, 0.0);

  QwgPayoff p;
  QwgStatus s = qwg_payoff(cfg, 1.5707963267948966, 2.6179938779914944, &p);
  if (s != QWG_STATUS_OK) {
    fprintf(stderr, "payoff: %s\n", qwg_last_error());
    qwg_config_free(cfg);
    return 1;
  }
  printf("u_A = %.6f  u_B = %.6f  <x_A> = %.6f  <x_B> = %.6f\n", p.u_a, p.u_b, p.mean_x_a, p.mean_x_b);
  qwg_config_free(cfg);
  return 0;
}
