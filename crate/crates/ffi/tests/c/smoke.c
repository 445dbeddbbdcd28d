#include "lclab.h"
#include <stdio.h>
int main(void) {
  LclabDistribution *d = NULL;
  if (lclab_distribution_new("cube", 4, &d) != LCLAB_STATUS_OK) return 1;
  LclabEstimate e;
  if (lclab_third_moment(d, d, 10000, 1, &e) != LCLAB_STATUS_OK) return 2;
  printf("%s %zu %g %g\n", lclab_version(), lclab_distribution_dim(d), e.value, e.std_error);
  if (lclab_distribution_new("nope", 4, &d) != LCLAB_STATUS_UNKNOWN_FAMILY) return 3;
  printf("%s\n", lclab_last_error());
  lclab_distribution_free(d);
  return 0;
}
