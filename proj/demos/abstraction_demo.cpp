// Builds the mini-domain corpus, forms the minimal outcome-equivalent
// abstraction over its union at horizon 6, and checks transfer optimality of
// one task's abstract MDP against another task sharing its classes.

#include <iostream>
#include <set>

#include "opsr/abstraction.hpp"
#include "opsr/domains.hpp"

using namespace opsr;

int main() {
  auto specs = enumerate_mini_domain();
  std::cout << "mini tasks: " << specs.size() << "\n";

  std::set<OutcomeFingerprint> classes;
  std::vector<CompiledTask> tasks;
  for (const auto& spec : specs) {
    tasks.push_back(compile_mini(spec));
    const auto& t = tasks.back();
    for (int s = 0; s < t.mdp.n_states; ++s)
      classes.insert(fingerprint(t.mdp, t.om, s, 6));
  }
  std::cout << "distinct horizon-6 outcome classes across the union: "
            << classes.size() << "\n";

  const auto& src = tasks[0];
  StateAbstraction phi = minimal_outcome_equivalent_abstraction(src.mdp, src.om, 6);
  AbstractMdp amdp = build_abstract_mdp(src.mdp, phi, uniform_weighting(phi));
  std::cout << "task 0: " << src.mdp.n_states << " ground states, "
            << amdp.mdp.n_states << " abstract states\n";

  TransferOptimalityResult res = check_transfer_optimality(amdp, src.mdp, phi, 1e-9);
  std::cout << "transfer optimal for its own ground task: "
            << (res.ok ? "yes" : "no") << "\n";
  return 0;
}
