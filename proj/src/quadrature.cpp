#include "nsqmc/quadrature.hpp"

#include <stdexcept>

namespace nsqmc {

namespace {

void push_perm3(TriQuadRule& rule, double a, double b, double w) {
    rule.push_back({{a, b, b}, w});
    rule.push_back({{b, a, b}, w});
    rule.push_back({{b, b, a}, w});
}

void push_perm6(TriQuadRule& rule, double a, double b, double c, double w) {
    rule.push_back({{a, b, c}, w});
    rule.push_back({{a, c, b}, w});
    rule.push_back({{b, a, c}, w});
    rule.push_back({{b, c, a}, w});
    rule.push_back({{c, a, b}, w});
    rule.push_back({{c, b, a}, w});
}

TriQuadRule make_degree2() {
    TriQuadRule rule;
    push_perm3(rule, 2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0);
    return rule;
}

TriQuadRule make_degree4() {
    TriQuadRule rule;
    push_perm3(rule, 0.108103018168070, 0.445948490915965, 0.223381589678011);
    push_perm3(rule, 0.816847572980459, 0.091576213509771, 0.109951743655322);
    return rule;
}

TriQuadRule make_degree5() {
    TriQuadRule rule;
    rule.push_back({{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, 0.225});
    push_perm3(rule, 0.0597158717897698, 0.4701420641051151, 0.1323941527885062);
    push_perm3(rule, 0.7974269853530873, 0.1012865073234563, 0.1259391805448271);
    return rule;
}

TriQuadRule make_degree8() {
    TriQuadRule rule;
    rule.push_back({{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, 0.14431560767778717});
    push_perm3(rule, 0.0814148234145540, 0.4592925882927231, 0.09509163426728462);
    push_perm3(rule, 0.6588613844964800, 0.1705693077517602, 0.10321737053471825);
    push_perm3(rule, 0.8989055433659380, 0.0505472283170310, 0.03245849762319808);
    push_perm6(rule, 0.0083947774099576, 0.2631128296346381, 0.7284923929554043,
               0.02723031417443499);
    return rule;
}

} // namespace

const TriQuadRule& triangle_rule(int degree) {
    static const TriQuadRule deg2 = make_degree2();
    static const TriQuadRule deg4 = make_degree4();
    static const TriQuadRule deg5 = make_degree5();
    static const TriQuadRule deg8 = make_degree8();
    switch (degree) {
        case 2: return deg2;
        case 4: return deg4;
        case 5: return deg5;
        case 8: return deg8;
        default: throw std::invalid_argument("triangle_rule: no rule of degree " +
                                             std::to_string(degree));
    }
}

} // namespace nsqmc
