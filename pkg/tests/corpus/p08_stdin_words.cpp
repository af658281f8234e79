#include <iostream>
#include <map>
#include <string>

std::map<std::string, int> freq;

static int letter_score(int len, int vowels) { return len * 2 + vowels; }

int main() {
    std::string w;
    long score = 0;
    while (std::cin >> w) {
        int vowels = 0;
        for (char c : w) {
            if (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') {
                vowels++;
            }
        }
        freq[w]++;
        score += letter_score(static_cast<int>(w.size()), vowels);
    }
    std::cout << freq.size() << " " << score << "\n";
    return 0;
}
