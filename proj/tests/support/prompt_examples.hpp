#pragma once

#include <string>
#include <vector>

namespace chemhop::testing {

struct LabeledQuestion {
  std::string question;
  bool valid;
};

// The labeled examples printed inside the one-hop verification prompt.
inline const std::vector<LabeledQuestion> kOneHopPromptExamples = {
    {"What dissolves in water and evaporates at 0 °C?", true},
    {"What catalyst is used in the reaction between A and B?", true},
    {"What is the song of Nirvana that is a chemical entity?", false},
    {"What chemical entity and structural unit form the layered hydroxide structures with intercalated water ions "
     "used in battery materials and OER catalysis?",
     false},
};

// The labeled examples printed inside the path verification prompt.
inline const std::vector<LabeledQuestion> kPathPromptExamples = {
    {"What dissolves in water?", true},
    {"What catalyst is used in the reaction between A and B?", true},
    {"Which compound undergoes oxidation in this reaction?", true},
    {"What product is formed when sodium reacts with chlorine?", true},
    {"Why do some scientists think this reaction is inefficient?", false},
    {"What is the best solvent for this reaction?", false},
    {"Is this reaction useful in industry?", false},
    {"Do you think this compound is a good catalyst?", false},
};

}  // namespace chemhop::testing
