#pragma once

#include <map>
#include <string>
#include <string_view>

namespace spectramin {

// Element symbol -> atom fraction. Fractions are nonnegative and sum to 1.
using ElementComposition = std::map<std::string, double>;

// -1 for anything that is not one of the 118 element symbols.
int atomic_number(std::string_view symbol);
bool is_element_symbol(std::string_view symbol);

struct ParsedFormula {
    std::map<std::string, double> counts;
    ElementComposition fractions;
};

// Accepts element symbols with decimal subscripts, (), [] and {} groups with
// multipliers, comma alternatives inside a group (equal shares), '·' / '*'
// hydrate parts with a leading coefficient, and strips charge annotations
// such as "Fe2+", "Fe^3+", "Fe³⁺" or a trailing "+"/"-".
ParsedFormula parse_formula(std::string_view text);

// Scales nonnegative weights to sum 1, dropping zero entries. Throws
// FormulaError when the total is not positive.
ElementComposition normalize_composition(const std::map<std::string, double>& weights);

// Throws FormulaError unless entries are known symbols, nonnegative and sum to 1 within `tol`.
void validate_composition(const ElementComposition& comp, double tol = 1e-9);

} // namespace spectramin
