#ifndef SPECMINE_ERROR_HPP
#define SPECMINE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace specmine {

enum class Errc {
    MalformedRecord,
    DuplicateTransactionId,
    NonMonotonicBlockNumber,
    AlreadyGhosted,
    NotGhosted,
    UnknownSeed,
    UnknownSignature,
    UnknownNode,
    CycleDetected,
    UnknownTransaction,
    UnknownState,
    UnknownVariable,
    EmptyCorpus,
    InvalidArgument,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::MalformedRecord: return "MalformedRecord";
        case Errc::DuplicateTransactionId: return "DuplicateTransactionId";
        case Errc::NonMonotonicBlockNumber: return "NonMonotonicBlockNumber";
        case Errc::AlreadyGhosted: return "AlreadyGhosted";
        case Errc::NotGhosted: return "NotGhosted";
        case Errc::UnknownSeed: return "UnknownSeed";
        case Errc::UnknownSignature: return "UnknownSignature";
        case Errc::UnknownNode: return "UnknownNode";
        case Errc::CycleDetected: return "CycleDetected";
        case Errc::UnknownTransaction: return "UnknownTransaction";
        case Errc::UnknownState: return "UnknownState";
        case Errc::UnknownVariable: return "UnknownVariable";
        case Errc::EmptyCorpus: return "EmptyCorpus";
        case Errc::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), m_code(code) {}

    Errc code() const { return m_code; }

  private:
    Errc m_code;
};

} // namespace specmine

#endif // SPECMINE_ERROR_HPP
