#pragma once

#include <stdexcept>
#include <string>

namespace prnet {

// Input or configuration problems. CLI maps these to exit code 2.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values, diverged training, failed numerical checks. Exit code 3.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeMismatch : ValidationError {
    explicit ShapeMismatch(const std::string& msg) : ValidationError("ShapeMismatch: " + msg) {}
};

struct DegenerateLandmarks : ValidationError {
    explicit DegenerateLandmarks(const std::string& msg)
        : ValidationError("DegenerateLandmarks: " + msg) {}
};

struct OutOfBounds : ValidationError {
    explicit OutOfBounds(const std::string& msg) : ValidationError("OutOfBounds: " + msg) {}
};

struct DegenerateBatch : ValidationError {
    explicit DegenerateBatch(const std::string& msg) : ValidationError("DegenerateBatch: " + msg) {}
};

struct LabelOutOfRange : ValidationError {
    explicit LabelOutOfRange(const std::string& msg) : ValidationError("LabelOutOfRange: " + msg) {}
};

struct TooFewLandmarks : ValidationError {
    explicit TooFewLandmarks(const std::string& msg) : ValidationError("TooFewLandmarks: " + msg) {}
};

struct EmptyRelationList : ValidationError {
    explicit EmptyRelationList(const std::string& msg)
        : ValidationError("EmptyRelationList: " + msg) {}
};

struct MissingRelationalFeature : ValidationError {
    explicit MissingRelationalFeature(const std::string& msg)
        : ValidationError("MissingRelationalFeature: " + msg) {}
};

struct EmptyTripletSet : ValidationError {
    explicit EmptyTripletSet(const std::string& msg) : ValidationError("EmptyTripletSet: " + msg) {}
};

struct NoValidTriplet : ValidationError {
    explicit NoValidTriplet(const std::string& msg) : ValidationError("NoValidTriplet: " + msg) {}
};

struct InvalidConfig : ValidationError {
    explicit InvalidConfig(const std::string& msg) : ValidationError("InvalidConfig: " + msg) {}
};

struct MissingPrerequisite : ValidationError {
    explicit MissingPrerequisite(const std::string& msg)
        : ValidationError("MissingPrerequisite: " + msg) {}
};

struct DegenerateLabelSet : ValidationError {
    explicit DegenerateLabelSet(const std::string& msg)
        : ValidationError("DegenerateLabelSet: " + msg) {}
};

struct EmptyGallery : ValidationError {
    explicit EmptyGallery(const std::string& msg) : ValidationError("EmptyGallery: " + msg) {}
};

struct NonFiniteValue : NumericalError {
    explicit NonFiniteValue(const std::string& msg) : NumericalError("NonFiniteValue: " + msg) {}
};

struct DivergedLoss : NumericalError {
    explicit DivergedLoss(const std::string& msg) : NumericalError("DivergedLoss: " + msg) {}
};

}  // namespace prnet
