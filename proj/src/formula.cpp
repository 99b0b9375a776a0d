#include "spectramin/formula.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <optional>
#include <vector>

#include "spectramin/error.hpp"

namespace spectramin {

namespace {

constexpr std::array<std::string_view, 118> kSymbols = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",  "S",  "Cl", "Ar",
    "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr",
    "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe",
    "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf",
    "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
    "Pa", "U",  "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs",
    "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

constexpr char kHydrate = '*';

using Counts = std::map<std::string, double>;

void add_scaled(Counts& into, const Counts& from, double factor) {
    for (const auto& [el, n] : from) into[el] += n * factor;
}

// Maps the UTF-8 forms we accept onto ASCII: hydrate dots become '*',
// subscript digits become digits, superscripts and '^' annotations vanish.
std::string to_ascii(std::string_view in) {
    std::string out;
    for (std::size_t i = 0; i < in.size();) {
        const auto c = static_cast<unsigned char>(in[i]);
        if (c < 0x80) {
            if (c == '^') {
                ++i;
                while (i < in.size() && std::isdigit(static_cast<unsigned char>(in[i]))) ++i;
                while (i < in.size() && (in[i] == '+' || in[i] == '-')) ++i;
                continue;
            }
            if (std::isspace(c)) {
                // A detached trailing charge such as "SO4 2-".
                std::size_t j = i;
                while (j < in.size() && std::isspace(static_cast<unsigned char>(in[j]))) ++j;
                std::size_t k = j;
                while (k < in.size() && std::isdigit(static_cast<unsigned char>(in[k]))) ++k;
                const std::size_t sign = k;
                while (k < in.size() && (in[k] == '+' || in[k] == '-')) ++k;
                const bool charge = k > sign && (k == in.size() || std::isspace(static_cast<unsigned char>(in[k])));
                i = charge ? k : j;
                continue;
            }
            out.push_back(static_cast<char>(c));
            ++i;
            continue;
        }
        const auto rest = in.substr(i);
        auto starts = [&](std::string_view p) { return rest.substr(0, p.size()) == p; };
        if (starts("\xC2\xB7") || starts("\xE2\x80\xA2") || starts("\xE2\x88\x99") || starts("\xE2\x8B\x85")) {
            out.push_back(kHydrate);
            i += starts("\xC2\xB7") ? 2 : 3;
        } else if (starts("\xC2\xB2") || starts("\xC2\xB3") || starts("\xC2\xB9")) {
            i += 2;  // superscript 2, 3, 1
        } else if (rest.size() >= 3 && starts("\xE2\x81") &&
                   (static_cast<unsigned char>(rest[2]) == 0xB0 ||
                    (static_cast<unsigned char>(rest[2]) >= 0xB4 && static_cast<unsigned char>(rest[2]) <= 0xBB))) {
            i += 3;  // superscript 0, 4-9, plus, minus
        } else if (rest.size() >= 3 && starts("\xE2\x82") && static_cast<unsigned char>(rest[2]) >= 0x80 &&
                   static_cast<unsigned char>(rest[2]) <= 0x89) {
            out.push_back(static_cast<char>('0' + (static_cast<unsigned char>(rest[2]) - 0x80)));
            i += 3;
        } else {
            throw FormulaError("unsupported character in formula '" + std::string(in) + "'");
        }
    }
    return out;
}

class Parser {
public:
    explicit Parser(std::string text) : s_(std::move(text)) {}

    Counts parse() {
        Counts total;
        do {
            if (pos_ < s_.size() && s_[pos_] == kHydrate) ++pos_;
            const double coef = number().value_or(1.0);
            const Counts part = sequence();
            if (part.empty()) fail("empty formula part");
            add_scaled(total, part, coef);
        } while (pos_ < s_.size() && s_[pos_] == kHydrate);
        strip_charge_tail();
        if (pos_ != s_.size()) {
            if (closes(s_[pos_])) fail("unbalanced parentheses");
            fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
        }
        return total;
    }

private:
    static bool opens(char c) { return c == '(' || c == '[' || c == '{'; }
    static bool closes(char c) { return c == ')' || c == ']' || c == '}'; }
    static char closer(char c) { return c == '(' ? ')' : c == '[' ? ']' : '}'; }

    [[noreturn]] void fail(const std::string& why) const {
        throw FormulaError(why + " in '" + s_ + "' at offset " + std::to_string(pos_));
    }

    std::optional<double> number() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (pos_ < s_.size() && s_[pos_] == '.' && pos_ > start) {
            ++pos_;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        }
        if (pos_ == start) return std::nullopt;
        return std::stod(s_.substr(start, pos_ - start));
    }

    void strip_charge_tail() {
        while (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
    }

    // Subscript after an element or group. Digits followed by a sign are a
    // charge; the digits after the sign, if any, are the subscript.
    double count() {
        auto n = number();
        if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) {
            strip_charge_tail();
            n = number();
        }
        const double v = n.value_or(1.0);
        if (!std::isfinite(v)) fail("bad subscript");
        return v;
    }

    Counts sequence() {
        Counts out;
        while (pos_ < s_.size()) {
            const char c = s_[pos_];
            if (std::isupper(static_cast<unsigned char>(c))) {
                std::string sym(1, c);
                ++pos_;
                if (pos_ < s_.size() && std::islower(static_cast<unsigned char>(s_[pos_]))) sym.push_back(s_[pos_++]);
                if (!is_element_symbol(sym)) fail("unknown element symbol '" + sym + "'");
                out[sym] += count();
            } else if (opens(c)) {
                ++pos_;
                Counts inner = group();
                if (pos_ >= s_.size() || s_[pos_] != closer(c)) fail("unbalanced parentheses");
                ++pos_;
                add_scaled(out, inner, count());
            } else {
                break;
            }
        }
        return out;
    }

    // Comma-separated alternatives share the site equally.
    Counts group() {
        std::vector<Counts> alts{sequence()};
        while (pos_ < s_.size() && s_[pos_] == ',') {
            ++pos_;
            alts.push_back(sequence());
        }
        Counts out;
        for (const auto& a : alts) {
            if (a.empty()) fail("empty group");
            add_scaled(out, a, 1.0 / static_cast<double>(alts.size()));
        }
        return out;
    }

    std::string s_;
    std::size_t pos_ = 0;
};

} // namespace

int atomic_number(std::string_view symbol) {
    for (std::size_t i = 0; i < kSymbols.size(); ++i)
        if (kSymbols[i] == symbol) return static_cast<int>(i + 1);
    return -1;
}

bool is_element_symbol(std::string_view symbol) { return atomic_number(symbol) > 0; }

ElementComposition normalize_composition(const std::map<std::string, double>& weights) {
    double total = 0.0;
    for (const auto& [el, w] : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw FormulaError("negative or non-finite amount for " + el);
        total += w;
    }
    if (!(total > 0.0)) throw FormulaError("composition has no positive amount");
    ElementComposition out;
    for (const auto& [el, w] : weights)
        if (w > 0.0) out[el] = w / total;
    return out;
}

void validate_composition(const ElementComposition& comp, double tol) {
    if (comp.empty()) throw FormulaError("empty composition");
    double total = 0.0;
    for (const auto& [el, f] : comp) {
        if (!is_element_symbol(el)) throw FormulaError("unknown element symbol '" + el + "'");
        if (!(f >= 0.0) || !std::isfinite(f)) throw FormulaError("fraction of " + el + " is not a nonnegative number");
        total += f;
    }
    if (std::abs(total - 1.0) > tol) throw FormulaError("fractions sum to " + std::to_string(total));
}

ParsedFormula parse_formula(std::string_view text) {
    Parser p(to_ascii(text));
    ParsedFormula out;
    for (const auto& [el, n] : p.parse())
        if (n > 0.0) out.counts[el] = n;
    if (out.counts.empty()) throw FormulaError("formula '" + std::string(text) + "' has no elements");
    out.fractions = normalize_composition(out.counts);
    return out;
}

} // namespace spectramin
