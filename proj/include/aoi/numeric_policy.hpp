#pragma once

namespace aoi {

// Every tolerance the library checks against lives here. Tests and the
// validation suite read the same object, so tightening a value in one place
// tightens it everywhere.
struct NumericPolicy {
  // PH distributions: alpha*1 + mass0 = 1.
  double ph_mass_tol = 1e-12;
  // ME distributions: alpha*1 + mass0 = 1.
  double me_mass_tol = 1e-10;
  // ME pdf nonnegativity screen.
  double me_pdf_floor = -1e-9;
  int me_screen_points = 200;
  double me_screen_horizon = 40.0;
  // -g A^-1 h + mass0 = 1 for densities handed to me_from_form.
  double form_mass_tol = 1e-9;
  // Entries of v = -A^-1 h below this fraction of max |v| are treated as zero
  // when building the realization; keeping them would make M nearly singular.
  double form_zero_rel = 1e-12;
  // Generator rows of Q and Qtilde sum to zero.
  double generator_row_tol = 1e-12;
  // Eigenvalue classification: anti-stable when Re(lambda) > -eps0, with
  // eps0 = anti_stable_rel * ||Q R^-1||.
  double anti_stable_rel = 1e-9;
  // Residual of the overdetermined boundary/normalization system.
  double step2_residual_tol = 1e-9;
  // Total probability of a solved fluid queue.
  double total_mass_tol = 1e-9;
};

inline NumericPolicy& numeric_policy() {
  static NumericPolicy policy;
  return policy;
}

}  // namespace aoi
