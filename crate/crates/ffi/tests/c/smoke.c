#include <math.h>
#include <stdio.h>
#include <string.h>
#include "shelab.h"

#define CHECK(cond)                                             \
    do {                                                        \
        if (!(cond)) {                                          \
            fprintf(stderr, "check failed: %s\n", #cond);       \
            return 1;                                           \
        }                                                       \
    } while (0)

int main(void) {
    double g = 0.0;
    CHECK(shelab_green_eval(SHELAB_BOUNDARY_NEUMANN, 0.1, 0.3, 0.6, &g) == SHELAB_STATUS_OK);
    CHECK(g > 0.0);
    CHECK(shelab_green_eval(SHELAB_BOUNDARY_NEUMANN, -1.0, 0.3, 0.6, &g) == SHELAB_STATUS_DOMAIN);
    char msg[256];
    CHECK(shelab_last_error_message(msg, sizeof msg) > 0);
    CHECK(strstr(msg, "domain") != NULL);

    ShelabModel *model = NULL;
    CHECK(shelab_model_new_affine(SHELAB_BOUNDARY_NEUMANN, 0.5, 0.2, 1.0, 1.0, &model) == SHELAB_STATUS_OK);
    ShelabScheme scheme = shelab_scheme_default();
    scheme.max_mode = 15;
    scheme.grid = 32;
    double values[32];
    CHECK(shelab_simulate_path(model, &scheme, 1, 0, values, 32) == SHELAB_STATUS_OK);
    CHECK(isfinite(values[0]));
    CHECK(shelab_simulate_path(model, &scheme, 1, 0, values, 31) == SHELAB_STATUS_DIMENSION);
    ShelabGaussian law;
    CHECK(shelab_affine_perturbed_law(model, &scheme, 0.5, false, &law) == SHELAB_STATUS_OK);
    CHECK(law.variance > 0.0);
    shelab_model_free(model);

    printf("c smoke ok %s\n", shelab_version());
    return 0;
}
