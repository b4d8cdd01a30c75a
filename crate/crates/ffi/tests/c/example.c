#include <stdio.h>
#include "jpcm.h"

int main(void) {
    JpcmScenario *scenario = NULL;
    JpcmController *controller = NULL;
    JpcmState state;
    JpcmStepResult out;

    if (jpcm_scenario_builtin("jpcm-gi", &scenario) != JPCM_STATUS_OK) {
        fprintf(stderr, "%s\n", jpcm_last_error());
        return 1;
    }
    jpcm_scenario_reference_state(scenario, 0.0, &state);
    if (jpcm_controller_new(scenario, &controller) != JPCM_STATUS_OK) {
        fprintf(stderr, "%s\n", jpcm_last_error());
        jpcm_scenario_free(scenario);
        return 1;
    }
    if (jpcm_controller_step(controller, &state, NULL, &out) == JPCM_STATUS_OK) {
        printf("rotors %.3f %.3f %.3f %.3f\n", out.rotors[0], out.rotors[1], out.rotors[2], out.rotors[3]);
    }
    jpcm_controller_free(controller);
    jpcm_scenario_free(scenario);
    return 0;
}
