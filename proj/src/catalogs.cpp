// Device tables of the FR, SP and US household datasets. The source tables
// list devices only; every device ships with a default action vocabulary
// that operators extend with `DeviceCatalog::extended` or a catalog file.

#include <algorithm>
#include <array>

#include "smartgen/core.hpp"
#include "smartgen/error.hpp"

namespace smartgen {

namespace {

constexpr std::array kFrDevices = {
    "AirConditioner", "AirPurifier",    "Blind",          "Camera",        "ClothingCareMachine",
    "Computer",       "ContactSensor",  "CurbPowerMeter", "Dishwasher",    "Dryer",
    "Elevator",       "Fan",            "GarageDoor",     "Light",         "Microwave",
    "MotionSensor",   "NetworkAudio",   "None",           "Other",         "Oven",
    "PresenceSensor", "Projector",      "Refrigerator",   "RemoteController", "RobotCleaner",
    "Siren",          "SmartLock",      "SmartPlug",      "Switch",        "Television",
    "Heater",         "Washer",         "WaterValve",
};

constexpr std::array kSpDevices = {
    "AirConditioner", "AirPurifier",    "Blind",          "Camera",        "ClothingCareMachine",
    "Computer",       "ContactSensor",  "CurbPowerMeter", "Dishwasher",    "Dryer",
    "Elevator",       "Fan",            "GarageDoor",     "Light",         "Microwave",
    "MotionSensor",   "NetworkAudio",   "None",           "Other",         "Oven",
    "PresenceSensor", "Projector",      "Refrigerator",   "RemoteController", "RobotCleaner",
    "SetTop",         "Siren",          "SmartLock",      "SmartPlug",     "Switch",
    "Television",     "Heater",         "Washer",         "WaterValve",
};

constexpr std::array kUsDevices = {
    "AirConditioner", "AirPurifier",   "Blind",           "Camera",         "ClothingCareMachine",
    "Computer",       "ContactSensor", "Dishwasher",      "Dryer",          "Elevator",
    "Fan",            "GarageDoor",    "Humidifier",      "Irrigation",     "LeakSensor",
    "Light",          "LightSensor",   "Microwave",       "MotionSenser",   "MultiFSensor",
    "NetworkAudio",   "None",          "Other",           "PresenceSensor", "Projector",
    "Refrigerator",   "RemoteController", "RobotCleaner", "SecurityPanel",  "Siren",
    "SmartLock",      "SmartPlug",     "SmokeDetector",   "SoundSensor",    "Switch",
    "Television",     "Heater",        "Vent",            "Washer",         "WaterValve",
};

std::set<std::string> default_actions(std::string_view device) {
    using S = std::set<std::string>;
    if (device == "AirConditioner") return S{"switch_on", "switch_off", "set_temperature", "mode_cool"};
    if (device == "Heater") return S{"switch_on", "switch_off", "set_temperature"};
    if (device == "Fan") return S{"switch_on", "switch_off", "set_speed"};
    if (device == "Light") return S{"switch_on", "switch_off", "dim"};
    if (device == "Blind" || device == "GarageDoor" || device == "WaterValve" || device == "Vent")
        return S{"open", "close"};
    if (device == "SmartLock") return S{"lock", "unlock"};
    if (device == "ContactSensor") return S{"open", "closed"};
    if (device == "MotionSensor" || device == "MotionSenser" || device == "PresenceSensor" ||
        device == "LeakSensor" || device == "LightSensor" || device == "MultiFSensor" ||
        device == "SoundSensor" || device == "SmokeDetector")
        return S{"detected", "cleared"};
    if (device == "Camera") return S{"switch_on", "switch_off", "record"};
    if (device == "Television" || device == "SetTop") return S{"switch_on", "switch_off", "change_channel"};
    if (device == "NetworkAudio") return S{"play", "pause", "stop"};
    if (device == "Washer" || device == "Dryer" || device == "Dishwasher" || device == "ClothingCareMachine" ||
        device == "Microwave" || device == "Oven" || device == "Irrigation")
        return S{"start", "stop"};
    if (device == "RobotCleaner") return S{"start", "dock"};
    if (device == "Refrigerator") return S{"door_open", "door_close"};
    if (device == "Elevator") return S{"call"};
    if (device == "Siren") return S{"activate", "deactivate"};
    if (device == "SecurityPanel") return S{"arm", "disarm"};
    if (device == "CurbPowerMeter") return S{"report"};
    if (device == "RemoteController") return S{"press"};
    if (device == "None" || device == "Other") return S{"event"};
    return S{"switch_on", "switch_off"};
}

template <std::size_t N>
DeviceCatalog make_catalog(std::string name, const std::array<const char*, N>& devices) {
    std::map<std::string, std::set<std::string>> entries;
    for (const char* d : devices) entries.emplace(d, default_actions(d));
    return DeviceCatalog{std::move(name), std::move(entries)};
}

} // namespace

DeviceCatalog bundled_catalog(std::string_view name) {
    if (name == "FR") return make_catalog("FR", kFrDevices);
    if (name == "SP") return make_catalog("SP", kSpDevices);
    if (name == "US") return make_catalog("US", kUsDevices);
    throw ConfigError("no bundled catalog named '" + std::string{name} + "' (expected FR, SP or US)");
}

std::vector<std::string> bundled_catalog_names() { return {"FR", "SP", "US"}; }

} // namespace smartgen
