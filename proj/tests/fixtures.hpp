#pragma once

namespace budgetlab::testfix {

// Representative model response for the parser golden test: free-form
// reasoning full of numeric bait, then the tagged answer block.
inline const char* kSampleResponse = R"(<reason>
Looking at the historical data, periods 3 and 5 kept returning rewards of
0.0000 across several rounds, so pushing more budget into them would be
wasted and I will cut their share. Periods 4 and 6 produced the strongest
rewards (0.2469, 0.2693 and even 0.4895 in earlier rounds), so they should
receive a larger slice. Period 2 showed a modest but nonzero reward
(0.0733, then 0.0726), which argues for a small increase there as well.
The total must still sum to 6, so after raising periods 2, 4 and 6 and
cutting 3 and 5, I rebalance the remaining share into period 1.
</reason>
<answer>
[0.93, 1.18, 0.77, 1.19, 0.75, 1.18]
</answer>)";

}  // namespace budgetlab::testfix
