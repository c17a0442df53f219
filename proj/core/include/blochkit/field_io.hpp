// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCHKIT_FIELD_IO_HPP
#define BLOCHKIT_FIELD_IO_HPP

#include <string>

#include "blochkit/coeff_field.hpp"

namespace blochkit
{

// Field documents are JSON objects
//   {"dimension": d, "cutoff": Kc,
//    "modes": [{"k": [k1(, k2)], "entries": [[[re, im], ...], ...]}, ...]}
// with a d x d entries matrix per listed mode (unlisted modes are zero). A 1D
// laminate may instead be given as
//   {"dimension": 1, "cutoff": Kc, "laminate": {"values": [...], "fractions": [...]}}.
// Tables violating reality or symmetry by more than 1e-10 are rejected with
// InvalidField.
FourierMatrixTable ParseFieldTable(const std::string &text);
CoefficientField ParseCoefficientField(const std::string &text);
PerturbationField ParsePerturbationField(const std::string &text);

CoefficientField LoadCoefficientField(const std::string &path);

// Serializes every nonzero mode at full precision.
std::string FieldDocument(const MatrixField &field);

}  // namespace blochkit

#endif  // BLOCHKIT_FIELD_IO_HPP
