#include <math.h>
#include <stdio.h>

#include "fharm.h"

#define CHECK(call)                                                            \
  do {                                                                         \
    FharmStatus s_ = (call);                                                   \
    if (s_ != FHARM_STATUS_OK) {                                               \
      const char *m_ = fharm_last_error_message();                             \
      fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_, m_ ? m_ : "");         \
      return 1;                                                                \
    }                                                                          \
  } while (0)

int main(void) {
  FharmIntegrand *f = NULL;
  FharmMesh *mesh = NULL;
  FharmField *u = NULL;
  FharmMeasure *mu = NULL;

  if (fharm_integrand_power(0.5, &f) != FHARM_STATUS_INVALID_INPUT) return 1;

  CHECK(fharm_integrand_power(2.0, &f));
  CHECK(fharm_mesh_new(FHARM_DOMAIN_KIND_DISK, 5.0, 5.0, 0.15, 0.25, &mesh));
  FharmSolveOptions opts = fharm_solve_options_default();
  CHECK(fharm_solve(mesh, f, &opts, &u));
  CHECK(fharm_measure_extract(u, f, &mu));

  size_t arcs = 0;
  double total = 0.0;
  CHECK(fharm_measure_summary(mu, &arcs, &total));
  double cap = 2.0 * M_PI / log(5.0);
  printf("fharm %s: %zu arcs, mass %.6f (capacity %.6f)\n", fharm_version(), arcs, total, cap);
  if (fabs(total / cap - 1.0) > 0.03) return 1;

  int64_t w[8];
  size_t n = 0;
  CHECK(fharm_winding_numbers(u, 0.5, w, 8, &n));
  for (size_t i = 0; i < n; i++) printf("winding %lld\n", (long long)w[i]);

  fharm_measure_free(mu);
  fharm_field_free(u);
  fharm_mesh_free(mesh);
  fharm_integrand_free(f);
  return 0;
}
