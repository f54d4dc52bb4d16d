#include <stdio.h>
#include <string.h>
#include "mtj_snn.h"

#define CHECK(expr)                                                        \
    do {                                                                   \
        MtjStatus s_ = (expr);                                             \
        if (s_ != MTJ_STATUS_OK) {                                         \
            fprintf(stderr, "%s: status %d: %s\n", #expr, (int)s_,         \
                    mtj_last_error_message());                             \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    MtjNetwork *net = NULL;
    CHECK(mtj_network_new_from_config("n_out = 2\ntheta0 = 1.0\nleak_alpha = 0\n", 4, &net));

    const uint8_t t0[4] = {1, 1, 0, 0};
    const uint8_t t1[4] = {1, 0, 0, 1};
    CHECK(mtj_network_program_row(net, 0, t0, 4));
    CHECK(mtj_network_program_row(net, 1, t1, 4));

    double out[2];
    CHECK(mtj_network_outputs(net, t1, 4, out, 2));
    if (out[0] > 1e-12 || out[0] < -1e-12 || out[1] < 0.9 - 1e-12 || out[1] > 0.9 + 1e-12) {
        fprintf(stderr, "outputs %f %f\n", out[0], out[1]);
        return 1;
    }

    int64_t winner = -2;
    size_t cycles = 0;
    CHECK(mtj_network_present(net, t1, 4, false, 50, &winner, &cycles, NULL));
    if (winner != 1 || cycles != 2) {
        fprintf(stderr, "winner %lld after %zu cycles\n", (long long)winner, cycles);
        return 1;
    }

    uint8_t *bytes = NULL;
    size_t len = 0;
    CHECK(mtj_network_snapshot_save(net, &bytes, &len));
    MtjNetwork *copy = NULL;
    CHECK(mtj_network_snapshot_load(bytes, len, "leak_alpha = 0\n", &copy));
    size_t n_out = 0, n_in = 0, r = 0;
    CHECK(mtj_network_dims(copy, &n_out, &n_in, &r));
    mtj_bytes_free(bytes, len);

    if (mtj_network_new_from_config("bogus = 1\n", 4, &net) != MTJ_STATUS_CONFIG ||
        strstr(mtj_last_error_message(), "bogus") == NULL) {
        fprintf(stderr, "expected a config error\n");
        return 1;
    }

    mtj_network_free(copy);
    mtj_network_free(net);
    printf("ok %s %zux%zux%zu\n", mtj_version(), n_out, n_in, r);
    return n_out == 2 && n_in == 4 && r == 1 ? 0 : 1;
}
